"""Independent scripted evaluation of the contraction-constant formula chains.

Run with `python3 formula_chain.py`; the printed values are frozen into
`tests/formula_oracle.rs` and the acceptance suite.
"""
import mpmath as mp

mp.mp.dps = 40


def w1_constants(g1_2l0, g_2l0_over, k2):
    # g_2l0_over: callable c2 -> g(2 l0)
    c2 = min(2 * k2, 1 / g1_2l0)
    g = g_2l0_over(c2)
    c1 = mp.e ** (-c2 * g)
    big_c = (1 + c1) / (2 * c1)
    lam = c2 / (1 + mp.e ** (c2 * g))
    return c2, c1, big_c, lam


def main():
    # sigma(s) = sqrt(s): g1(r) = 2 sqrt(r); l0 = 1/2, K2 = 1, Phi1 = 0.
    g1 = mp.quad(lambda s: 1 / mp.sqrt(s), [0, 1])
    c2, c1, big_c, lam = w1_constants(g1, lambda c2: g1, 1)
    print("w1 sqrt case: g1(1)=%s c2=%s c1=%s C=%s lambda=%s" % (
        mp.nstr(g1, 17), mp.nstr(c2, 17), mp.nstr(c1, 17), mp.nstr(big_c, 17), mp.nstr(lam, 17)))

    # TV chain: c1 = e^-1, K1 = 0, K2 = 1, g(2 l0) = 2, psi(kappa) = 0.3, J_kappa = 5.
    k1, k2, g2l0, psi_k, jk = 0, 1, mp.mpf(2), mp.mpf("0.3"), mp.mpf(5)
    m = min(2 * k2, 1 / g2l0)
    c1 = mp.e ** (-1)
    a = (2 / jk) * (k1 * (c1 + 1) + c1 / (c1 + 1) * m * psi_k)
    lam = c1 / (c1 + 1) * m / (1 + a / psi_k)
    print("tv chain: a=%s lambda=%s" % (mp.nstr(a, 17), mp.nstr(lam, 17)))

    # overlap mass of q(z)=|z|^-2 at x=1, by quadrature of min(q(z), q(z-1)).
    q = lambda z: 1 / z ** 2
    f = lambda z: min(q(z), q(z - 1))
    mass = mp.quad(f, [-mp.inf, 0, 0.5, 1, mp.inf])
    print("overlap mass |z|^-2 at x=1: %s" % mp.nstr(mass, 17))
    for s in [0.5, 1, 2]:
        fs = lambda z: min(q(z), q(z - s))
        print("J(%s) = %s (4/s = %s)" % (s, mp.nstr(mp.quad(fs, [-mp.inf, 0, s / 2, s, mp.inf]), 17), 4 / mp.mpf(s)))

    # Half-space overlap lower bound constants, c = 1.
    for d in [1, 2]:
        omega = 2 * mp.pi ** (mp.mpf(d) / 2) / mp.gamma(mp.mpf(d) / 2)
        for alpha in [0.5, 1.2]:
            k = omega / (2 ** (d + 1 + alpha) * alpha) * (1 - 3 ** (-alpha))
            print("example bound d=%d alpha=%s: %s * s^-alpha" % (d, alpha, mp.nstr(k, 17)))

    # Strong ergodic tail: Phi2 = r^2, integral from 1 to inf of 1/Phi2.
    print("tail integral: %s" % mp.nstr(mp.quad(lambda r: 1 / r ** 2, [1, mp.inf]), 17))


if __name__ == "__main__":
    main()
