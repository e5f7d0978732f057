# Frozen reference values for the C++ tests, computed with mpmath's
# Bessel routines (independent of the recurrence code in sphere_oracle.hpp).
# Run: python3 reference_values.py > ../oracle_values.inc
import mpmath as mp

mp.mp.dps = 40


def i_sph(l, z):
    return mp.sqrt(mp.pi / (2 * z)) * mp.besseli(l + mp.mpf(1) / 2, z)


def k_sph(l, z):
    return mp.sqrt(2 / (mp.pi * z)) * mp.besselk(l + mp.mpf(1) / 2, z)


def P(f, l, z):
    # d/dr (r f(kappa r)) at r=1
    return f(l, z) + z * mp.diff(lambda w: f(l, w), z)


def eps_int(s):
    return mp.mpf(1) / 2 + 1 / (1 + mp.sqrt(s))


def mie(l, s, pol):
    eps_m = eps_int(s)
    mu_m = mp.mpf(1) / 2
    kin = mp.sqrt(eps_m * s) * mp.sqrt(mu_m * s)
    kout = s
    w_in = mu_m if pol == "TE" else eps_m
    w_out = 1
    R = P(i_sph, l, kin) / (w_in * i_sph(l, kin))
    a = (P(i_sph, l, kout) / w_out - i_sph(l, kout) * R) / (k_sph(l, kout) * R - P(k_sph, l, kout) / w_out)
    b = (i_sph(l, kout) + a * k_sph(l, kout)) / i_sph(l, kin)
    return a, b


def emit(name, z):
    z = mp.mpc(z)
    print("{%s, %.17e, %.17e}," % (name, float(z.real), float(z.imag)))


print("// generated by tests/oracles/reference_values.py")
print("struct BesselRef { int l; double zr, zi; double ir, ii, kr, ki; };")
print("inline const BesselRef kBesselRefs[] = {")
for l in [0, 1, 2, 5, 15, 30]:
    for z in [mp.mpc(0.5, 0), mp.mpc(1, 2), mp.mpc(10, -3), mp.mpc(40, 20), mp.mpc(0.05, 0.3)]:
        iv = i_sph(l, z)
        kv = k_sph(l, z)
        print("  {%d, %.17g, %.17g, %.17e, %.17e, %.17e, %.17e}," % (
            l, float(z.real), float(z.imag), float(iv.real), float(iv.imag), float(kv.real), float(kv.imag)))
print("};")

print("struct MieRef { int l; double sr, si; int tm; double ar, ai, br, bi; };")
print("inline const MieRef kMieRefs[] = {")
for l in [1, 2]:
    for s in [mp.mpc(1, 0), mp.mpc(1, 2)]:
        for pol in ["TE", "TM"]:
            a, b = mie(l, s, pol)
            print("  {%d, %.17g, %.17g, %d, %.17e, %.17e, %.17e, %.17e}," % (
                l, float(s.real), float(s.imag), 1 if pol == "TM" else 0,
                float(a.real), float(a.imag), float(b.real), float(b.imag)))
print("};")


def m_eps_mu(s):
    vals = []
    for e in [eps_int(s), mp.mpf(1) / 2, 1, 1]:
        w = e * s
        vals.append((abs(w) ** 2 + 1) / mp.re(w))
    return max(vals)


print("inline constexpr double kMEpsMuS1 = %.17e;" % float(m_eps_mu(mp.mpf(1))))
print("inline constexpr double kMEpsMuS1p2i = %.17e;" % float(m_eps_mu(mp.mpc(1, 2))))
