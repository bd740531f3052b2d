// Generated once with mpmath (50 digits, erfc form), Python random.Random(7). Do not edit by hand.
#![allow(clippy::excessive_precision)]

/// `(x, kappa, probit(x, kappa), 1 - probit(x, kappa))`
pub const PROBIT: [(f64, f64, f64, f64); 50] = [
    (0.0, 0.5, 2.338867490523632919e-3, 0.99766113250947636708),
    (
        -1.0570034110010258,
        0.5,
        3.8576624509294290554e-7,
        0.99999961423375490706,
    ),
    (-2.5653822799947434, 0.25, 1.8791213415482378898e-39, 1.0),
    (0.4967280354201309, 0.5, 0.033254989237807347234, 0.96674501076219265277),
    (
        -2.7750260493480905,
        0.5,
        2.6807972393886404532e-17,
        0.99999999999999997319,
    ),
    (-1.55602199923785, 0.5, 1.4210205971483760693e-9, 0.99999999857897940285),
    (1.9611127480322281, 0.5, 0.86297829070113442601, 0.13702170929886557399),
    (0.7837554943904226, 0.5, 0.10366953197142134564, 0.89633046802857865436),
    (0.4626176917049918, 0.5, 0.028507765200088296517, 0.97149223479991170348),
    (-2.7205039162934623, 0.25, 4.3959825559991077728e-43, 1.0),
    (
        -0.4851657385712085,
        1.104337476787678,
        5.4202167437920364951e-4,
        0.99945797832562079635,
    ),
    (
        -1.1491090553883938,
        0.5,
        1.4747527235905639143e-7,
        0.99999985252472764094,
    ),
    (
        -2.381665725338452,
        0.5,
        1.5779631260381767823e-14,
        0.99999999999998422037,
    ),
    (
        -0.7656147436456129,
        0.5,
        6.5133348423277079883e-6,
        0.99999348666515767229,
    ),
    (
        0.38620975880031994,
        1.0,
        7.2986773061462846686e-3,
        0.99270132269385371533,
    ),
    (
        1.0823998390907157,
        0.25,
        0.93334448991495687842,
        0.066655510085043121579,
    ),
    (
        -0.20638880496195622,
        0.25,
        1.291020152652461955e-4,
        0.9998708979847347538,
    ),
    (
        -1.2013980188179059,
        0.5,
        8.4196036437336876969e-8,
        0.99999991580396356266,
    ),
    (
        -2.508869935225381,
        1.0,
        4.7171201826432237421e-8,
        0.99999995282879817357,
    ),
    (
        2.250824973440573,
        0.25,
        0.99999999966891613647,
        3.3108386352533066015e-10,
    ),
    (
        0.6537541142184216,
        0.19274169154635268,
        0.7134321829807336965,
        0.2865678170192663035,
    ),
    (
        -0.49126306928863706,
        0.5,
        6.9215970024161122262e-5,
        0.99993078402997583888,
    ),
    (2.599621273083825, 0.5, 0.99112555385632866672, 8.8744461436713332801e-3),
    (
        1.587425197276879,
        0.25,
        0.99978526043420088779,
        2.1473956579911220826e-4,
    ),
    (
        -0.9592658268528269,
        1.0,
        7.6026296760042458598e-5,
        0.99992397370323995754,
    ),
    (
        0.47937122569495294,
        0.5,
        0.030763809558531136412,
        0.96923619044146886359,
    ),
    (2.668086570647624, 0.5, 0.99392480164737262944, 6.0751983526273705628e-3),
    (
        -2.6359834344166817,
        1.4179094415436266,
        1.3828780483993924396e-6,
        0.99999861712195160061,
    ),
    (
        2.9585756367998046,
        0.25,
        0.99999999999999999989,
        1.0697598358062845918e-19,
    ),
    (
        1.2997667663898218,
        0.25,
        0.99112133984439682003,
        8.8786601556031799651e-3,
    ),
    (
        -2.8646224316664686,
        0.5,
        5.7584744580227985832e-18,
        0.99999999999999999424,
    ),
    (0.6655172608984614, 0.5, 0.067145565939756691271, 0.93285443406024330873),
    (1.609397930835124, 0.5, 0.65186804897954834837, 0.34813195102045165163),
    (
        -0.6126139287226038,
        1.0,
        2.8974030201746824501e-4,
        0.99971025969798253175,
    ),
    (
        -2.5165121927991683,
        0.9259154318511954,
        1.4589643994892663481e-8,
        0.99999998541035600511,
    ),
    (-1.332965215293296, 1.0, 1.581565559488008402e-5, 0.99998418434440511992),
    (2.1839068181910912, 1.0, 0.2596190470116428177, 0.7403809529883571823),
    (2.9188024860071167, 1.0, 0.53600553228908378375, 0.46399446771091621625),
    (
        2.7463872237839473,
        0.5,
        0.99614310633998298799,
        3.8568936600170120109e-3,
    ),
    (
        -2.092209701301596,
        0.5,
        1.1675878229484274431e-12,
        0.99999999999883241218,
    ),
    (
        -0.09022361795186029,
        0.25,
        7.1303565983647523234e-4,
        0.99928696434016352477,
    ),
    (
        -1.308415666039574,
        0.3340689652930621,
        7.6497395278858214746e-12,
        0.99999999999235026047,
    ),
    (-0.784478562631648, 0.5, 5.478163998426527481e-6, 0.99999452183600157347),
    (
        1.1429619428158677,
        1.055208294488018,
        0.040469399135054335522,
        0.95953060086494566448,
    ),
    (0.9297987822979721, 1.0, 0.028806679597409900802, 0.9711933204025900992),
    (
        2.397198060347713,
        1.570940506876842,
        0.09637899270454118083,
        0.90362100729545881917,
    ),
    (
        -0.6457265586523881,
        0.5,
        1.8953468617091898541e-5,
        0.9999810465313829081,
    ),
    (
        -0.11086309100883174,
        0.5,
        1.1436229052549440194e-3,
        0.99885637709474505598,
    ),
    (
        -2.595914304941851,
        0.5,
        5.2762617097545838191e-16,
        0.99999999999999947237,
    ),
    (
        -2.340430169997201,
        0.5,
        2.9725025542020242205e-14,
        0.99999999999997027497,
    ),
];

/// `(x, erf(x), erfc(x))`
pub const ERF: [(f64, f64, f64); 53] = [
    (-5.99720061718372, -0.99999999999999997774, 1.9999999999999999777),
    (-4.184820812646865, -0.99999999674576008991, 1.9999999967457600899),
    (-4.7824275837288415, -0.99999999998651853303, 1.999999999986518533),
    (-1.6366809355851482, -0.97936606415708246396, 1.979366064157082464),
    (-5.693989360006252, -0.99999999999999918892, 1.9999999999999991889),
    (4.491988528485836, 0.99999999978833710114, 2.116628988620635542e-10),
    (1.3688278534617453, 0.94710962647127735248, 0.052890373528722647524),
    (-4.217394176029303, -0.9999999975430905716, 1.9999999975430905716),
    (-2.9729069213150727, -0.99997381378838386093, 1.9999738137883838609),
    (-1.8313254473555816, -0.99039920805606848767, 1.9903992080560684877),
    (-1.6300387256606106, -0.97884590551346689551, 1.9788459055134668955),
    (-4.5258932308536615, -0.99999999984521176173, 1.9999999998452117617),
    (4.187243117815379, 0.99999999681284242477, 3.1871575752277935201e-9),
    (5.917232660456566, 0.99999999999999994151, 5.84898060547286069e-17),
    (-0.4081264900807948, -0.4361807946433805194, 1.4361807946433805194),
    (-0.19398412300476675, -0.21617279307132629706, 1.2161727930713262971),
    (-4.9693840613260125, -0.99999999999790140057, 1.9999999999979014006),
    (-4.773748599021978, -0.99999999998532715918, 1.9999999999853271592),
    (-1.8883699410839778, -0.99242747982608421799, 1.992427479826084218),
    (-2.822917299393839, -0.99993453906596932905, 1.9999345390659693291),
    (3.9462645374587257, 0.99999997606689088006, 2.3933109119942509051e-8),
    (-4.0627366736828225, -0.99999999083921075889, 1.9999999908392107589),
    (-5.722851347457022, -0.99999999999999941947, 1.9999999999999994195),
    (5.411826874496425, 0.99999999999998043863, 1.9561365183846718676e-14),
    (0.3390887405054972, 0.36844825162373996548, 0.63155174837626003452),
    (-4.240769533210912, -0.99999999799441197677, 1.9999999979944119768),
    (0.5180691105853725, 0.53623439481362166819, 0.46376560518637833181),
    (-5.675490102933978, -0.99999999999999899589, 1.9999999999999989959),
    (0.3373132912596777, 0.36666139929735329522, 0.63333860070264670478),
    (5.742014912627674, 0.99999999999999953549, 4.6451430990984748897e-16),
    (4.359900363476026, 0.99999999929885718835, 7.0114281165004566363e-10),
    (2.354361430893622, 0.99913019760899576078, 8.6980239100423921525e-4),
    (-2.8666176332476567, -0.99994965283723767648, 1.9999496528372376765),
    (-1.5996024988658544, -0.97631368763487711468, 1.9763136876348771147),
    (-3.9954955855879644, -0.99999998400033428799, 1.999999984000334288),
    (3.263254900824375, 0.99999606789851106436, 3.9321014889356444301e-6),
    (0.3911087699145481, 0.41981281892358623934, 0.58018718107641376066),
    (3.348658696058127, 0.99999781719656397376, 2.1828034360262424961e-6),
    (-2.0440200594268516, -0.99615591766759387474, 1.9961559176675938747),
    (-3.3234999227617785, -0.99999740015106426944, 1.9999974001510642694),
    (0.0, 0.0, 1.0),
    (1e-08, 1.1283791670955125599e-8, 0.99999998871620832904),
    (-0.001, -1.1283787909692364034e-3, 1.0011283787909692364),
    (0.5, 0.52049987781304653768, 0.47950012218695346232),
    (3.0, 0.99997790950300141456, 2.2090496998585441373e-5),
    (-3.5, -0.99999925690162765859, 1.9999992569016276586),
    (5.9, 0.9999999999999999281, 7.1904097835504777249e-17),
    (27.0, 1.0, 5.237048923789255685e-319),
    (-27.0, -1.0, 2.0),
    (1e-300, 1.1283791670955126022e-300, 1.0),
    (9.25, 1.0, 4.2020372149197111345e-39),
    (12.5, 1.0, 6.2319427819799110061e-70),
    (20.0, 1.0, 5.3958656116079009289e-176),
];
