"""Reference values of E_{beta,nu}(z) by direct series summation at 60 digits.

Writes ml_oracle.txt: one line per point, `beta nu re(z) im(z) re(E) im(E)`.
"""
import random
from mpmath import mp, mpf, mpc, gamma, nstr

mp.dps = 60


def ml_series(beta, nu, z):
    # enough working digits to absorb the cancellation of the largest term
    peak, n = 0, 0
    while True:
        lt = n * mp.log(abs(z) + mpf(10) ** -30) - mp.loggamma(mpf(beta) * n + mpf(nu))
        peak = max(peak, lt / mp.log(10))
        if n > 10 and lt / mp.log(10) < peak - 5 and lt < 0:
            break
        n += 1
    with mp.workdps(60 + int(peak)):
        return _sum(mpf(beta), mpf(nu), mpc(z))


def _sum(beta, nu, z):
    total = mpc(0)
    n = 0
    while True:
        term = z**n / gamma(beta * n + nu)
        total += term
        if n > 10 and abs(term) < mpf(10) ** (-55) * max(1, abs(total)):
            return total
        n += 1


def main():
    rng = random.Random(20240611)
    rows = []
    for _ in range(50):
        r = 5 * rng.random() ** 0.5
        th = rng.uniform(-3.141592653589793, 3.141592653589793)
        z = mpc(mpf(repr(r)) * mp.cos(th), mpf(repr(r)) * mp.sin(th))
        # round the argument to doubles so both sides see the same point
        z = mpc(float(z.real), float(z.imag))
        rows.append(("0.5", "1", z))
    extra = [
        ("0.5", "1", mpc(-2, 0)),
        ("0.5", "0.5", mpc(1.2, 0)),
        ("0.6", "1", mpc(2, 0)),
        ("0.3", "1.5", mpc(-1.5, 0.5)),
        ("0.8", "1", mpc(-20, 0)),
        ("0.9", "1.3", mpc(12, -9)),
        ("1.5", "1", mpc(-30, 10)),
        ("0.25", "1.75", mpc(-3, 0)),
        ("0.1", "1", mpc(-0.6, 0.1)),
        ("1.8", "2.2", mpc(45, 0)),
    ]
    rows.extend(extra)
    with open("ml_oracle.txt", "w") as f:
        for beta, nu, z in rows:
            v = ml_series(beta, nu, z)
            f.write(
                f"{beta} {nu} {nstr(z.real, 17)} {nstr(z.imag, 17)} "
                f"{nstr(v.real, 20)} {nstr(v.imag, 20)}\n"
            )


if __name__ == "__main__":
    main()
