"""Freeze Ratcliff/Obershelp ratios from Python's difflib (autojunk disabled).

Run: python3 gen_difflib_fixtures.py > difflib_fixtures.json
"""
import difflib
import json
import random

rng = random.Random(20260416)
alphabets = ["ab ", "abc xyz", "0123456789.+- ", "the quick brown fox ", "aaab"]
cases = [
    ("alpha beta", "alpha gamma"),
    ("abc", "xyz"),
    ("", ""),
    ("", "a"),
    ("identical", "identical"),
    ("\\frac 12 x+1", "\\frac{1}{2}x + 1"),
]
for _ in range(300):
    alpha = rng.choice(alphabets)
    la = rng.randint(0, 40)
    lb = rng.randint(0, 40)
    cases.append(("".join(rng.choice(alpha) for _ in range(la)),
                  "".join(rng.choice(alpha) for _ in range(lb))))
for _ in range(20):
    alpha = rng.choice(alphabets)
    cases.append(("".join(rng.choice(alpha) for _ in range(rng.randint(200, 400))),
                  "".join(rng.choice(alpha) for _ in range(rng.randint(200, 400)))))

out = []
for a, b in cases:
    ratio = difflib.SequenceMatcher(None, a, b, autojunk=False).ratio() if (a or b) else 1.0
    out.append({"a": a, "b": b, "ratio": ratio})
print(json.dumps(out, indent=0))
