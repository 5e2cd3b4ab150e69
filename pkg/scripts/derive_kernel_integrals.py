"""Symbolic derivation of the Matern kernel-product integrals on [0, 1].

Derives, for each Matern family (1/2, 3/2, 5/2), the closed form of

    w(u, v) = int_0^1 k(u, x) k(v, x) dx          (u <= v)

together with its partial derivatives in u and v and the self-derivative
d w(x, x)/dx.  Results are regrouped into three exponential terms whose
arguments are non-positive on 0 <= u <= v <= 1, so the generated code
cannot overflow for small lengthscales.  Every generated expression is
checked against mpmath quadrature / finite differences before the module
is written.

Run from the repository root:

    python scripts/derive_kernel_integrals.py src/repex/_matern_w.py
"""
import sys

import mpmath as mp
import sympy as sp
from sympy.printing.numpy import NumPyPrinter

u, v, t = sp.symbols('u v t', positive=True)
A, B, Q = sp.symbols('A B Q', positive=True)

FAMILIES = {
    '12': (sp.Integer(1), lambda r: sp.exp(-r / t)),
    '32': (sp.sqrt(3), lambda r: (1 + sp.sqrt(3) * r / t) * sp.exp(-sp.sqrt(3) * r / t)),
    '52': (sp.sqrt(5), lambda r: (1 + sp.sqrt(5) * r / t + sp.Rational(5, 3) * r ** 2 / t ** 2)
           * sp.exp(-sp.sqrt(5) * r / t)),
}

# exponential groups, all with non-positive argument when 0 <= u <= v <= 1
GROUPS = {(-1, -1, 0): 'e_m', (1, -1, 0): 'e_d', (1, 1, 1): 'e_p'}


def derive_w(kf):
    x = sp.symbols('x', positive=True)
    p1 = sp.integrate(kf(u - x) * kf(v - x), (x, 0, u))
    p2 = sp.integrate(kf(x - u) * kf(v - x), (x, u, v))
    p3 = sp.integrate(kf(x - u) * kf(x - v), (x, v, 1))
    return sp.simplify(p1 + p2 + p3)


def group_exponentials(expr, c):
    subs = {sp.exp(c * u / t): A, sp.exp(-c * u / t): 1 / A,
            sp.exp(c * v / t): B, sp.exp(-c * v / t): 1 / B,
            sp.exp(-2 * c / t): Q}
    e = sp.expand(sp.expand(expr.rewrite(sp.exp)).subs(subs))
    coeffs = {key: sp.Integer(0) for key in GROUPS}
    for term in sp.Add.make_args(e):
        pd = term.as_powers_dict()
        key = (int(pd.get(A, 0)), int(pd.get(B, 0)), int(pd.get(Q, 0)))
        if key not in GROUPS:
            raise RuntimeError(f'unexpected exponential monomial {key}')
        coeffs[key] += term / (A ** key[0] * B ** key[1] * Q ** key[2])
    out = {}
    for key, name in GROUPS.items():
        cf = sp.expand(sp.cancel(sp.together(coeffs[key])))
        try:
            cf = sp.horner(cf, wrt=t)
        except sp.PolynomialError:
            pass  # Laurent in t; leave expanded, cse dedups

        if cf.has(A) or cf.has(B) or cf.has(Q) or cf.has(sp.exp):
            raise RuntimeError('left-over exponential in coefficient')
        out[name] = cf
    return out


def emit_function(name, args, coeffs, printer):
    e_m, e_d, e_p = sp.symbols('e_m e_d e_p')
    body = coeffs['e_m'] * e_m + coeffs['e_d'] * e_d + coeffs['e_p'] * e_p
    reps, (red,) = sp.cse(body, optimizations='basic')
    lines = [f'def {name}({", ".join(args)}, c, e_m, e_d, e_p):']
    for sym, sub in reps:
        lines.append(f'    {sym} = {printer.doprint(sub)}')
    lines.append(f'    return {printer.doprint(red)}')
    return '\n'.join(lines)


def verify(mods, fam, c_val, kf):
    import numpy as np
    ns = {}
    exec(mods, ns)
    rng = np.random.default_rng(7)
    kfn = sp.lambdify((u, v, t), kf(sp.Abs(u - v)).rewrite(sp.exp), 'mpmath')
    for _ in range(25):
        uu, vv = sorted(rng.uniform(0, 1, 2))
        tt = float(rng.uniform(0.02, 4.0))
        c = float(c_val)
        e_m = mp.exp(-c * (uu + vv) / tt)
        e_d = mp.exp(c * (uu - vv) / tt)
        e_p = mp.exp(c * (uu + vv - 2) / tt)
        got = ns[f'w{fam}'](uu, vv, tt, c, e_m, e_d, e_p)
        ref = mp.quad(lambda x: kfn(uu, float(x), tt) * kfn(vv, float(x), tt),
                      [0, uu, vv, 1])
        assert abs(got - ref) <= 1e-9 * max(1e-12, abs(ref)), (fam, uu, vv, tt, got, ref)
        h = 1e-7
        for dname, darg in (('dwdu', 0), ('dwdv', 1)):
            gotd = ns[f'{dname}{fam}'](uu, vv, tt, c, e_m, e_d, e_p)
            pts = [uu, vv]
            pts[darg] += h
            wp = mp.quad(lambda x: kfn(pts[0], float(x), tt) * kfn(pts[1], float(x), tt),
                         [0, min(pts), max(pts), 1])
            pts[darg] -= 2 * h
            wm = mp.quad(lambda x: kfn(pts[0], float(x), tt) * kfn(pts[1], float(x), tt),
                         [0, min(pts), max(pts), 1])
            ref_d = (wp - wm) / (2 * h)
            assert abs(gotd - ref_d) <= 2e-6 * max(1e-8, abs(ref_d)), \
                (fam, dname, uu, vv, tt, gotd, ref_d)


def main(out_path):
    printer = NumPyPrinter()
    chunks = [
        '"""Closed-form Matern kernel-product integrals on [0, 1] (generated).',
        '',
        'Generated by scripts/derive_kernel_integrals.py -- do not edit by hand.',
        'All functions assume elementwise u <= v and receive the precomputed',
        'exponentials e_m = exp(-c(u+v)/t), e_d = exp(c(u-v)/t),',
        'e_p = exp(c(u+v-2)/t), whose arguments are non-positive on the domain.',
        '"""',
        'import numpy',
        '',
        'SQRT3 = numpy.sqrt(3.0)',
        'SQRT5 = numpy.sqrt(5.0)',
        '',
    ]
    mp.mp.dps = 30
    for fam, (c_sym, kf) in FAMILIES.items():
        w = derive_w(kf)
        dwdu = sp.diff(w, u)
        dwdv = sp.diff(w, v)
        for label, expr in (('w', w), ('dwdu', dwdu), ('dwdv', dwdv)):
            coeffs = group_exponentials(expr, c_sym)
            chunks.append(emit_function(f'{label}{fam}', ('u', 'v', 't'), coeffs, printer))
            chunks.append('')
        src_so_far = '\n'.join(chunks)
        verify(src_so_far, fam, c_sym.evalf(30), kf)
        print(f'family {fam}: verified against quadrature and finite differences')
    with open(out_path, 'w') as f:
        f.write('\n'.join(chunks))
    print(f'wrote {out_path}')


if __name__ == '__main__':
    main(sys.argv[1] if len(sys.argv) > 1 else 'src/repex/_matern_w.py')
