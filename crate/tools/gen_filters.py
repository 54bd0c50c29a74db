#!/usr/bin/env python3
"""Generate Daubechies filter coefficient tables (extremal-phase and
least-asymmetric) for N=2..10 vanishing moments via spectral factorization
in high precision, verify invariants, and emit a Rust table.

Not part of the build; run once to produce crates/rlsw/src/wavelet/tables.rs.
"""
import mpmath as mp

mp.mp.dps = 80

def poly_mul(a, b):
    out = [mp.mpc(0)] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        for j, bj in enumerate(b):
            out[i + j] += ai * bj
    return out

def y_roots(N):
    """Roots of P(y) = sum_{k<N} C(N-1+k,k) y^k (ascending coeffs)."""
    coeffs = [mp.binomial(N - 1 + k, k) for k in range(N)]
    if N == 1:
        return []
    roots = mp.polyroots(list(reversed(coeffs)), maxsteps=500, extraprec=500)
    return roots

def refine(y, N):
    """Newton-polish a root of P(y) at full working precision."""
    coeffs = [mp.binomial(N - 1 + k, k) for k in range(N)]
    def p(v):
        s = mp.mpc(0)
        for c in reversed(coeffs):
            s = s * v + c
        return s
    def dp(v):
        s = mp.mpc(0)
        for k in range(N - 1, 0, -1):
            s = s * v + k * coeffs[k]
        return s
    for _ in range(50):
        step = p(y) / dp(y)
        y = y - step
        if abs(step) < mp.mpf(10) ** (-70):
            break
    return y

def z_pair(y):
    """Reciprocal z-root pair for a given y-root of P: z^2-(2-4y)z+1=0."""
    b = 2 - 4 * y
    disc = mp.sqrt(b * b - 4)
    z1 = (b + disc) / 2
    z2 = (b - disc) / 2
    if abs(z1) > abs(z2):
        z1, z2 = z2, z1
    # polish reciprocity
    z2 = 1 / z1
    return z1, z2  # inside, outside

def root_groups(N):
    """Conjugate-closed groups of z-roots as (inside_list, outside_list)."""
    groups = []
    seen_conj = []
    for y in y_roots(N):
        y = refine(y, N)
        if abs(mp.im(y)) < mp.mpf(10) ** (-60):
            zin, zout = z_pair(mp.re(y))
            groups.append(([zin], [zout]))
        else:
            if any(abs(y - mp.conj(p)) < mp.mpf(10) ** (-40) for p in seen_conj):
                continue
            seen_conj.append(y)
            zin, zout = z_pair(y)
            groups.append(([zin, mp.conj(zin)], [zout, mp.conj(zout)]))
    return groups

def filter_from_selection(N, selected):
    poly = [mp.mpc(1)]
    for _ in range(N):
        poly = poly_mul(poly, [mp.mpc(1), mp.mpc(1)])  # (1+z)
    for r in selected:
        poly = poly_mul(poly, [-r, mp.mpc(1)])  # (z - r)
    poly = [mp.re(c) for c in poly]
    s = sum(poly)
    return [c / s * mp.sqrt(2) for c in poly]

def verify(h, N, tol=mp.mpf(10) ** (-55)):
    L = len(h)
    assert abs(sum(h) - mp.sqrt(2)) < tol, f"sum != sqrt2: {sum(h)-mp.sqrt(2)}"
    assert abs(sum(x * x for x in h) - 1) < tol, f"norm != 1"
    for m in range(1, N):
        s = sum(h[k] * h[k + 2 * m] for k in range(L - 2 * m))
        assert abs(s) < tol, f"orthogonality lag {2*m}: {s}"
    g = [(-1) ** k * h[L - 1 - k] for k in range(L)]
    for p in range(N):
        s = sum(g[k] * mp.mpf(k) ** p for k in range(L))
        assert abs(s) < mp.mpf(10) ** (-45), f"moment {p}: {s}"

def phase_measure(h):
    L = len(h)
    total = mp.mpf(0)
    n = 128
    for i in range(1, n):
        w = mp.pi * i / n
        H = sum(h[k] * mp.e ** (-1j * w * k) for k in range(L))
        val = H * mp.e ** (1j * w * (L - 1) / 2)
        total += mp.atan2(mp.im(val), mp.re(val)) ** 2
    return total

def gen_family(N, family):
    groups = root_groups(N)
    if family == "db":
        h = filter_from_selection(N, [r for inside, _ in groups for r in inside])
        verify(h, N)
        return h
    best, best_m = None, None
    for mask in range(1 << len(groups)):
        sel = []
        for gi, (inside, outside) in enumerate(groups):
            sel.extend(inside if (mask >> gi) & 1 == 0 else outside)
        h = filter_from_selection(N, sel)
        m = phase_measure(h)
        if best_m is None or m < best_m - mp.mpf(10) ** (-40):
            best_m, best = m, h
    verify(best, N)
    return best

KNOWN = {
    ("db", 2): [0.48296291314469025, 0.8365163037378079, 0.22414386804185735, -0.12940952255092145],
    ("db", 3): [0.3326705529509569, 0.8068915093133388, 0.4598775021193313, -0.13501102001039084,
                -0.08544127388224149, 0.035226291882100656],
    ("db", 4): [0.23037781330885523, 0.7148465705525415, 0.6308807679295904, -0.02798376941698385,
                -0.18703481171888114, 0.030841381835986965, 0.032883011666982945, -0.010597401784997278],
    ("db", 6): [0.11154074335008017, 0.4946238903983854, 0.7511339080215775, 0.3152503517092432,
                -0.22626469396516913, -0.12976686756709563, 0.09750160558707936, 0.02752286553001629,
                -0.031582039318031156, 0.0005538422009938016, 0.004777257511010651, -0.001077301084996392],
    ("sym", 4): [0.03222310060404270, -0.012603967262037833, -0.09921954357684722, 0.29785779560527736,
                 0.803738751805916, 0.49761866763201545, -0.02963552764599851, -0.07576571478927333],
}

def check_known(fam, N, h):
    # reference values are transcribed to ~12 digits; this check pins the
    # orientation and catches gross errors, the invariant checks in verify()
    # pin the precision
    if (fam, N) not in KNOWN:
        return "n/a", h
    ref = KNOWN[(fam, N)]
    fwd = max(abs(float(a) - b) for a, b in zip(h, ref))
    rev = max(abs(float(a) - b) for a, b in zip(reversed(h), ref))
    if fwd < 1e-11:
        return "match", h
    if rev < 1e-11:
        return "match-reversed", list(reversed(h))
    return f"MISMATCH fwd={fwd:.2e} rev={rev:.2e}", h

def fmt(x):
    return mp.nstr(x, 17, strip_zeros=False)

out = {}
orient_reversed = None
for fam in ("db", "sym"):
    for N in range(2, 11):
        h = gen_family(N, fam)
        status, h = check_known(fam, N, h)
        if fam == "db" and status == "match-reversed":
            orient_reversed = True
        out[(fam, N)] = h
        print(f"{fam}{N}: L={len(h)} known-check={status}")

# db roots chosen inside the unit circle give the reversed orientation of the
# published tables; apply the same flip to the unchecked db entries.
if orient_reversed:
    for N in range(2, 11):
        key = ("db", N)
        if check_known("db", N, out[key])[0] == "n/a":
            out[key] = list(reversed(out[key]))

with open("/root/crate/tools/tables_gen.rs", "w") as f:
    for fam in ("db", "sym"):
        for N in range(2, 11):
            h = out[(fam, N)]
            name = f"{fam.upper()}{N}"
            f.write(f"pub(crate) const {name}: [f64; {len(h)}] = [\n")
            for x in h:
                f.write(f"    {fmt(x)},\n")
            f.write("];\n")
print("wrote /root/crate/tools/tables_gen.rs")
