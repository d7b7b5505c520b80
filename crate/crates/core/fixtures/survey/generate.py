"""Builds the synthetic pre/post questionnaire cohort used by the tests.

183 students answer both questionnaires and 8 more answer only the post
questionnaire. Category counts per grade are fixed below; individual
answers are assigned with a seeded shuffle, so rerunning the script
reproduces the committed CSVs byte for byte.
"""

import csv
import random
from pathlib import Path

HERE = Path(__file__).parent
rng = random.Random(20240611)

# q1 pre -> post transitions of the 183 matched students, per grade.
Q1_G8 = [[4, 5, 2], [3, 25, 16], [0, 3, 8]]
Q1_G5 = [[8, 7, 2], [12, 58, 23], [2, 1, 4]]
# q1 answers of the post-only students.
Q1_POST_ONLY = {5: [1, 0, 3], 8: [1, 2, 1]}

# Category counts for q2 and q3: (pre g5, pre g8, post g5, post g8).
Q2 = ([68, 31, 0, 15, 3], [37, 11, 1, 15, 2], [44, 42, 2, 22, 11], [24, 12, 2, 12, 20])
Q3 = ([28, 36, 46, 7, 0], [13, 13, 29, 10, 1], [16, 35, 54, 7, 9], [9, 13, 34, 5, 9])

MATCHED = {5: 117, 8: 66}
POST_ONLY = {5: 4, 8: 4}


def expand(counts):
    out = [cat for cat, n in enumerate(counts) for _ in range(n)]
    rng.shuffle(out)
    return out


students = []  # (id, grade, matched)
n = 0
for grade in (5, 8):
    for _ in range(MATCHED[grade]):
        n += 1
        students.append((f"s{n:03d}", grade, True))
for grade in (5, 8):
    for _ in range(POST_ONLY[grade]):
        n += 1
        students.append((f"s{n:03d}", grade, False))

answers = {sid: {"pre": {}, "post": {}} for sid, _, _ in students}

# q1 from the transition matrices
for grade, matrix in ((5, Q1_G5), (8, Q1_G8)):
    pairs = [(a, b) for a, row in enumerate(matrix) for b, k in enumerate(row) for _ in range(k)]
    rng.shuffle(pairs)
    matched = [s for s, g, m in students if g == grade and m]
    for sid, (a, b) in zip(matched, pairs, strict=True):
        answers[sid]["pre"]["q1"] = a
        answers[sid]["post"]["q1"] = b
    only = [s for s, g, m in students if g == grade and not m]
    for sid, cat in zip(only, expand(Q1_POST_ONLY[grade]), strict=True):
        answers[sid]["post"]["q1"] = cat

# q2 and q3 from per-grade marginals
for q, (pre5, pre8, post5, post8) in (("q2", Q2), ("q3", Q3)):
    for grade, pre, post in ((5, pre5, post5), (8, pre8, post8)):
        matched = [s for s, g, m in students if g == grade and m]
        only = [s for s, g, m in students if g == grade and not m]
        for sid, cat in zip(matched, expand(pre), strict=True):
            answers[sid]["pre"][q] = cat
        for sid, cat in zip(matched + only, expand(post), strict=True):
            answers[sid]["post"][q] = cat

# Likert item 1: 119 of 183 positive before, 174 of 191 after.
def likert_column(total, positive):
    pos = [rng.choice([4, 5]) for _ in range(positive)]
    neg = [rng.choice([1, 2, 3]) for _ in range(total - positive)]
    out = pos + neg
    rng.shuffle(out)
    return out

pre_ids = [s for s, _, m in students if m]
post_ids = [s for s, _, _ in students]
for sid, v in zip(pre_ids, likert_column(183, 119), strict=True):
    answers[sid]["pre"]["l1"] = v
for sid, v in zip(post_ids, likert_column(191, 174), strict=True):
    answers[sid]["post"]["l1"] = v

# Items 2..11: noisy answers drifting upward after the workshop.
for sid, _, matched in students:
    for item in range(2, 12):
        base = rng.randint(1, 5)
        if matched:
            answers[sid]["pre"][f"l{item}"] = base
        answers[sid]["post"][f"l{item}"] = min(5, base + rng.choice([0, 0, 1, 1, 2]))

# A few blanks exercise missing-value handling.
for sid in ("s010", "s050", "s120"):
    answers[sid]["post"]["l11"] = None

header = ["student_id", "phase", "grade"] + [f"l{i}" for i in range(1, 12)] + ["q1", "q2", "q3"]
for phase, ids in (("pre", pre_ids), ("post", post_ids)):
    grade_of = {s: g for s, g, _ in students}
    with open(HERE / f"{phase}.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for sid in ids:
            a = answers[sid][phase]
            row = [sid, phase, grade_of[sid]]
            row += ["" if a.get(f"l{i}") is None else a[f"l{i}"] for i in range(1, 12)]
            row += [a["q1"], a["q2"], a["q3"]]
            w.writerow(row)

# Two coders labelling 100 answers with equal marginals (15, 15, 16, 20, 34)
# and 13 disagreements arranged in cycles: kappa = 0.832.
MARGINALS = [15, 15, 16, 20, 34]
SWAPS = [(0, 1)] * 3 + [(1, 2)] * 3 + [(2, 0)] * 3 + [(3, 4)] * 2 + [(4, 3)] * 2
pairs = []
remaining = list(MARGINALS)
for a, b in SWAPS:
    pairs.append((a, b))
    remaining[a] -= 1
for cat, k in enumerate(remaining):
    pairs += [(cat, cat)] * k
rng.shuffle(pairs)
with open(HERE / "raters.csv", "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["rater_a", "rater_b"])
    for a, b in pairs:
        w.writerow([a, b])
