"""Recomputes readability_10.expected.json from readability_10.txt.

Sentences are the file's lines; words are runs of letters. Syllables are
vowel groups (aeiouy) less a final silent e; familiar words come from the
bundled Dale-Chall list.
"""
import json
import math
import pathlib
import re

here = pathlib.Path(__file__).parent
easy = set((here / "../../resources/dale_chall_easy.txt").read_text().split())


def syllables(word):
    w = word.lower()
    groups = len(re.findall(r"[aeiouy]+", w))
    if len(w) >= 2 and w[-1] == "e" and w[-2] not in "aeiouy" and groups > 1:
        groups -= 1
    return groups


lines = [l for l in (here / "readability_10.txt").read_text().splitlines() if l.strip()]
words = [w for l in lines for w in re.findall(r"[A-Za-z]+", l)]
s = len(lines)
n = len(words)
syl = sum(syllables(w) for w in words)
poly = sum(syllables(w) >= 3 for w in words)
hard = sum(w.lower() not in easy for w in words)
wps, spw, pct = n / s, syl / n, 100 * hard / n
out = {
    "sentences": s,
    "words": n,
    "syllables": syl,
    "polysyllables": poly,
    "difficult": hard,
    "flesch": 206.835 - 1.015 * wps - 84.6 * spw,
    "flesch_kincaid": 0.39 * wps + 11.8 * spw - 15.59,
    "gunning_fog": 0.4 * (wps + 100 * poly / n),
    "smog": 1.0430 * math.sqrt(poly * 30 / s) + 3.1291,
    "dale_chall": 0.1579 * pct + 0.0496 * wps + (3.6365 if pct > 5 else 0.0),
}
(here / "readability_10.expected.json").write_text(json.dumps(out, indent=2) + "\n")
