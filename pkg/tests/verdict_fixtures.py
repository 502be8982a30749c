"""Judge output fixtures: (raw text, expected winner, expected confidence)."""

WELL_FORMED = [
    ("Analysis...\n<winner>A</winner>\n<confidence>HIGH</confidence>", "A", "HIGH"),
    ("<winner>B</winner><confidence>LOW</confidence>", "B", "LOW"),
    ("<winner>TIE</winner>\n<confidence>HIGH</confidence>", "TIE", "HIGH"),
    ("<winner> tie </winner>", "TIE", "LOW"),
    ("<WINNER>a</WINNER>\n<CONFIDENCE>high</CONFIDENCE>", "A", "HIGH"),
    ("<winner>\n  B\n</winner>\n<confidence> low </confidence>", "B", "LOW"),
    ("Solution A fails on n=0.\n\n<winner>B</winner>\n<confidence>HIGH</confidence>\n", "B", "HIGH"),
    ("<confidence>LOW</confidence>\n<winner>A</winner>", "A", "LOW"),
    ("Both are right.\n<winner>TIE</winner>\n<confidence>LOW</confidence>", "TIE", "LOW"),
    ("<winner>A or B or TIE</winner> placeholder echoed, then\n<winner>A</winner>\n<confidence>HIGH</confidence>",
     "A", "HIGH"),
    ("Draft: <winner>A</winner>. Revised after tracing:\n<winner>B</winner>\n<confidence>HIGH</confidence>",
     "B", "HIGH"),
    ("<winner>B</winner>", "B", "LOW"),
    ("Winner: A\nConfidence: HIGH", "A", "HIGH"),
    ("The winner is B. Confidence: LOW.", "B", "LOW"),
    ("winner = Tie\nconfidence = high", "TIE", "HIGH"),
    ("**Winner:** Solution A\n**Confidence:** HIGH", "A", "HIGH"),
    ("Final verdict -> winner: B (confidence is LOW)", "B", "LOW"),
    ("<winner>B</winner>\n<confidence>MEDIUM</confidence>", "B", "LOW"),
    ("```\n<winner>A</winner>\n<confidence>LOW</confidence>\n```", "A", "LOW"),
    ("<winner>\tTIE\t</winner><confidence>\tLOW</confidence>", "TIE", "LOW"),
    ("Reasoning mentions <b>bold</b> tags.\n<winner>A</winner>\n<confidence>HIGH</confidence>", "A", "HIGH"),
    ("WINNER: B\nCONFIDENCE: high", "B", "HIGH"),
    ("<winner>a</winner>\n<confidence>Low</confidence>", "A", "LOW"),
]

MALFORMED = [
    "",
    "I cannot decide.",
    "<winner></winner>\n<confidence>HIGH</confidence>",
    "<winner>C</winner>",
    "<winner>Both</winner><confidence>LOW</confidence>",
    "The answer is 42.",
    "<confidence>HIGH</confidence>",
    "<winn>A</winn>",
    "Solution A looks cleaner but B handles edge cases.",
    "winner winner chicken dinner",
    "<verdict>A</verdict>",
    "{\"choice\": \"first\"}",
]

RATINGS = [
    ("<rating>7</rating>", 7),
    ("<rating>12</rating>", 10),
    ("<rating>0</rating>", 1),
    ("<rating>11</rating>", 10),
    ("rating: 3 out of 10", 3),
    ("Rating = 9", 9),
    ("<rating> 5 </rating>", 5),
    ("first <rating>2</rating> then corrected <rating>8</rating>", 8),
]

BAD_RATINGS = ["", "excellent", "<rating>seven</rating>", "score: 7"]

PAIR_RATINGS = [
    ("<rating_A>9</rating_A>\n<rating_B>3</rating_B>", (9, 3)),
    ("<rating_A>5</rating_A><rating_B>5</rating_B>", (5, 5)),
    ("Rating A: 12, Rating B: 0", (10, 1)),
]
