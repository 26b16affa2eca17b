const QUARTIC_N8: [f64; 8] = [
    0.48887053372346189882,
    0.53294503589346652887,
    0.59763084583800501916,
    0.63933468388607370422,
    0.67626444657092349239,
    0.70748486496681306166,
    0.7352066213842492838,
    0.76008000975152550393,
];
