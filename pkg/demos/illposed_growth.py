"""Growth of the second-iterate pieces on the two-box counterexample data.

Prints the norms of the three pieces for N = 16..128 at s = -1.5 together
with the fitted log-log slopes for the exact kernel and for its envelope.
"""

from nvlab.illposed import illposed_sweep


def main():
    rep = illposed_sweep(s=-1.5, N_list=(16, 32, 64, 128), t=1.0)
    print(f"{'N':>6} {'I':>12} {'II':>12} {'III':>12}")
    for r in rep.rows:
        print(f"{r.N:6.0f} {r.I:12.4e} {r.II:12.4e} {r.III:12.4e}")
    for key in ("I", "II", "III"):
        print(f"slope {key:>3}: exact {rep.slopes[key]:+.3f}, envelope {rep.envelope_slopes[key]:+.3f}, "
              f"expected {rep.expected[key]:+.1f}")


if __name__ == "__main__":
    main()
