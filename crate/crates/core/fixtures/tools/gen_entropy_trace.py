"""Construct the ten-inference entropy trace fixture.

Each record carries 125 output tokens split into two probability levels:
`n_low` tokens at probability `b` and the rest at probability `a`. For a
target (perplexity P, mean probability m) we pick the smallest `n_low` for
which the system

    (N - n_low) * a + n_low * b = N * m
    (N - n_low) * ln a + n_low * ln b = -N * ln P

has a solution with 0 < b < a <= 1, solve it by bisection on `a`, and round
the log-probabilities to six decimals. Output is written in canonical
trace-line form (keys in fixed order, shortest float repr).
"""

import json
import math
import sys

N = 125
INPUT_TOKENS = 13953
TARGETS = [
    (1.14, 0.92), (1.12, 0.95), (1.11, 0.94), (1.12, 0.93), (1.11, 0.93),
    (1.09, 0.95), (1.21, 0.91), (1.52, 0.78), (1.40, 0.81), (1.29, 0.87),
]


def solve(P, m, n_low):
    n_hi = N - n_low

    def b_of(a):
        return (N * m - n_hi * a) / n_low

    def g(a):
        b = b_of(a)
        if b <= 0:
            return None
        return n_hi * math.log(a) + n_low * math.log(b) + N * math.log(P)

    # a ranges over (m, 1]; b decreases as a increases
    lo, hi = m, 1.0
    if b_of(hi) <= 0 or g(hi) is None:
        return None
    glo, ghi = g(lo + 1e-15), g(hi)
    if glo is None or ghi is None or glo * ghi > 0:
        return None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if gm is None:
            hi = mid
            continue
        if (gm > 0) == (glo > 0):
            lo, glo = mid, gm
        else:
            hi = mid
    a = 0.5 * (lo + hi)
    b = b_of(a)
    if not (0 < b < a <= 1):
        return None
    return a, b


def main():
    out = sys.stdout
    for step, (P, m) in enumerate(TARGETS, start=1):
        for n_low in range(1, N):
            sol = solve(P, m, n_low)
            if sol:
                break
        else:
            raise SystemExit(f"no construction for step {step}")
        a, b = sol
        la, lb = round(math.log(a), 6), round(math.log(b), 6)
        # spread the low-probability tokens evenly through the sequence
        logprobs = [la] * N
        for j in range(n_low):
            logprobs[(j * N) // n_low] = lb
        rec = {
            "step": step,
            "role": "base",
            "input_tokens": INPUT_TOKENS,
            "output_tokens": N,
            "logprobs": logprobs,
        }
        out.write(json.dumps(rec, separators=(",", ":")) + "\n")
        ppl = math.exp(-sum(logprobs) / N)
        avg = sum(math.exp(x) for x in logprobs) / N
        print(f"step {step}: n_low={n_low} a={a:.6f} b={b:.6f} -> P={ppl:.5f} p={avg:.5f}", file=sys.stderr)


if __name__ == "__main__":
    main()
