"""Reference computation for the golden metric fixture.

Written separately from the C++ implementation; regenerates expected.json
from dataset.jsonl and predictions.jsonl in this directory.
"""
import json
import math
import os
import re
import sys
from collections import Counter
from itertools import combinations

HERE = os.path.dirname(os.path.abspath(__file__))


def normalize(s):
    s = s.lower()
    s = re.sub(r"([!-/:-@\[-`{-~])", r" \1 ", s)
    return " ".join(s.split())


def toks(s):
    return normalize(s).split()


def ngrams(t, n):
    return Counter(tuple(t[i:i + n]) for i in range(len(t) - n + 1))


def bleu(pairs):
    m = [0] * 4
    tot = [0] * 4
    c = r = 0
    for cand, refs, *_ in pairs:
        c += len(cand)
        r += min((abs(len(x) - len(cand)), len(x)) for x in refs)[1]
        for n in range(1, 5):
            cc = ngrams(cand, n)
            best = Counter()
            for x in refs:
                best |= ngrams(x, n)
            tot[n - 1] += sum(cc.values())
            m[n - 1] += sum(min(v, best[g]) for g, v in cc.items())
    bp = 1.0 if c >= r else math.exp(1 - r / c)
    out = []
    for n in range(1, 5):
        ps = [m[i] / tot[i] if tot[i] else 0.0 for i in range(n)]
        if min(ps) == 0:
            out.append(0.0)
        else:
            out.append(100 * bp * math.exp(sum(math.log(p) for p in ps) / n))
    return out


def lcs_brute(a, b):
    # Longest subsequence of a that is also a subsequence of b.
    def is_sub(s, t):
        it = iter(t)
        return all(x in it for x in s)
    for k in range(len(a), 0, -1):
        for idx in combinations(range(len(a)), k):
            if is_sub([a[i] for i in idx], b):
                return k
    return 0


def rouge_l(pairs, beta=1.2):
    scores = []
    for cand, refs, *_ in pairs:
        best = 0.0
        for x in refs:
            l = lcs_brute(cand, x)
            if l:
                rec, prec = l / len(x), l / len(cand)
                best = max(best, (1 + beta ** 2) * rec * prec / (rec + beta ** 2 * prec))
        scores.append(best)
    return 100 * sum(scores) / len(scores)


def meteor_pair(cand, ref):
    used = [False] * len(ref)
    matches = chunks = 0
    last = None
    for w in cand:
        here = None
        if last is not None and last + 1 < len(ref) and not used[last + 1] and ref[last + 1] == w:
            here = last + 1
        else:
            free = [j for j in range(len(ref)) if not used[j] and ref[j] == w]
            if free:
                here = free[0]
                chunks += 1
        if here is not None:
            used[here] = True
            matches += 1
        last = here
    if not matches:
        return 0.0
    p, r = matches / len(cand), matches / len(ref)
    return 10 * p * r / (r + 9 * p) * (1 - 0.5 * (chunks / matches) ** 3)


def meteor(pairs):
    return 100 * sum(max(meteor_pair(c, x) for x in refs) for c, refs, *_ in pairs) / len(pairs)


def cider(pairs):
    N = len(pairs)
    total = 0.0
    for cand, refs, *_ in pairs:
        s = 0.0
        for n in range(1, 5):
            df = Counter()
            for _, rr, *_ in pairs:
                df.update(set(g for x in rr for g in ngrams(x, n)))

            def vec(t):
                return {g: v * math.log(N / max(1, df[g])) for g, v in ngrams(t, n).items()}

            def cos(a, b):
                na = math.sqrt(sum(v * v for v in a.values()))
                nb = math.sqrt(sum(v * v for v in b.values()))
                if na == 0 or nb == 0:
                    return 0.0
                return sum(v * b.get(g, 0.0) for g, v in a.items()) / (na * nb)

            s += sum(cos(vec(cand), vec(x)) for x in refs) / len(refs)
        total += s / 4 * 10
    return total / N


def accuracy(pairs):
    def canon(a):
        return " ".join(t for t in toks(a) if not (len(t) == 1 and not t.isalnum()))
    return 100 * sum(canon(ca) == canon(ra) for _, _, ca, ra in pairs) / len(pairs)


def main():
    data = {}
    with open(os.path.join(HERE, "dataset.jsonl")) as f:
        for line in f:
            if line.strip():
                d = json.loads(line)
                data[d["id"]] = d
    pairs = []
    with open(os.path.join(HERE, "predictions.jsonl")) as f:
        for line in f:
            if line.strip():
                p = json.loads(line)
                d = data[p["id"]]
                refs = [toks(d["explanation"])] + [toks(e) for e in d.get("explanations", [])
                                                   if normalize(e) != normalize(d["explanation"])]
                pairs.append((toks(p["explanation"]), refs, p["answer"], d["answer"]))
    report = {"bleu": bleu(pairs), "rouge_l": rouge_l(pairs), "meteor_lite": meteor(pairs),
              "cider": 100 * cider(pairs), "spice": None, "accuracy": accuracy(pairs), "n": len(pairs)}
    if "--cider-hand" in sys.argv:
        hand = [(["a", "b"], [["a", "c"]], "", ""), (["c", "d"], [["c", "d"]], "", "")]
        print(repr(cider(hand)))
        return
    with open(os.path.join(HERE, "expected.json"), "w") as f:
        json.dump(report, f, indent=2)
        f.write("\n")
    print(json.dumps(report, indent=2))


if __name__ == "__main__":
    main()
