"""Independent Gillespie SIR simulation using only the standard library.

Rates: infection beta * S * I / P, recovery gamma * I.  Prints the mean
number of new infections over the requested runs.

Usage: python3 sir_bruteforce.py S0 I0 RUNS [SEED]
"""

import random
import sys

P = 2000
BETA = 0.5
GAMMA = 0.5


def new_infections(s, i, rnd):
    s0 = s
    while i > 0:
        infect = BETA * s * i / P
        total = infect + GAMMA * i
        rnd.expovariate(total)  # event time, not needed for the final size
        if rnd.random() * total < infect:
            s -= 1
            i += 1
        else:
            i -= 1
    return s0 - s


def mean_new_infections(s0, i0, runs, seed=0):
    rnd = random.Random(seed)
    return sum(new_infections(s0, i0, rnd) for _ in range(runs)) / runs


if __name__ == "__main__":
    s0, i0, runs = (int(v) for v in sys.argv[1:4])
    seed = int(sys.argv[4]) if len(sys.argv) > 4 else 0
    print(mean_new_infections(s0, i0, runs, seed))
