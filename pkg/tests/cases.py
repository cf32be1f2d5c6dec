"""Case-study fixtures: (station node, predicted text, reference text, expected).

The texts are written for this suite to reproduce the structure of each
published case; they are not transcriptions.
"""

CASES = {
    # high pressure over the southwest in both texts, station Tucson
    1: (
        "tucson-az",
        "A strong area of high pressure centered over the southwestern US will keep skies clear "
        "and temperatures mild through the weekend.",
        "High pressure over the Southwest maintains dry conditions across Arizona today. "
        "Light winds and clear skies continue.",
        {"s": 1.0},
    ),
    # reference: ridge over the forecast area; prediction: trough over the southeast
    2: (
        "columbia-sc",
        "A trough in the southeastern United States will bring up to 1 inch of snow tonight.",
        "A ridge remains in place over the forecast area, keeping conditions dry and mild.",
        {"s": 0.0},
    ),
    # two matched H objects, one unmatched object on each side
    3: (
        "denver-co",
        "A ridge strengthens over the Rockies tonight. Low pressure develops near Maine by tomorrow.",
        "High pressure builds over Colorado tonight. A trough digs into California tomorrow.",
        {"s_m": 1.0, "r_c": 0.5, "s": 0.5},
    ),
    # prediction has synoptic systems, reference only short wave troughs
    4: (
        "chicago-il",
        "Low pressure over the Great Lakes pulls a trough across the region tonight.",
        "Short wave troughs will bring periods of light snow tonight. Winds stay gusty.",
        {"s": 0.0, "r_c": 0.0, "defined": True},
    ),
    # everything in one area; an extra ridge in the prediction spoils the phase balance
    5: (
        "denver-co",
        "A trough moves across Colorado tonight, then a ridge builds over Colorado tomorrow. "
        "High pressure holds over the Rockies into the weekend.",
        "A trough crosses Colorado tonight. A ridge builds over the Rockies tomorrow.",
        {"r_c": 1.0, "s_m_below": 1.0},
    ),
}
