#!/usr/bin/env python3
"""Writes data/window_golden.csv: closed-form safe-drive voltage windows.

One selected cell (load 1/G_C at the output) is driven alongside n_other
unselected companions on the same output line. The window bounds follow from
three current balances, evaluated here directly so the table is independent
of the C++ implementation:

  v_lo            the drive where the selected path still reaches I_SET when
                  every companion input is amorphous: the output cell sees
                  (n1+1)/n1 dividers with n1 = n_other + 1 driven lines,
                  giving v_lo = (n1+1)/n1 * I_SET / G_C.
  reset bound     same divider against I_RESET: (n1+1)/n1 * I_RESET / G_C.
  false-set bound drive at which an amorphous selected cell would reach
                  I_SET through n1 amorphous companions:
                  (1/G_C + 1/(n1*G_A)) * I_SET.
  v_hi            min(reset bound, false-set bound).
"""

import os

G_A = 660e-9
G_C = 160e-6
I_SET = 50e-6
I_RESET = 100e-6


def window(n_other):
    n1 = n_other + 1
    v_lo = (n1 + 1) / n1 * I_SET / G_C
    reset_bound = (n1 + 1) / n1 * I_RESET / G_C
    false_set = (1.0 / G_C + 1.0 / (n1 * G_A)) * I_SET
    return v_lo, min(reset_bound, false_set), false_set


def main():
    out_dir = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data")
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "window_golden.csv")
    rows = list(range(128)) + [255, 511, 1023, 2047, 4095]
    with open(path, "w") as f:
        f.write("n_other,v_lo,v_hi,false_set_bound\n")
        for n in rows:
            v_lo, v_hi, fs = window(n)
            f.write("%d,%.17g,%.17g,%.17g\n" % (n, v_lo, v_hi, fs))
    print("wrote %s (%d rows)" % (path, len(rows)))


if __name__ == "__main__":
    main()
