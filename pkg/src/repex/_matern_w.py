"""Closed-form Matern kernel-product integrals on [0, 1] (generated).

Generated by scripts/derive_kernel_integrals.py -- do not edit by hand.
All functions assume elementwise u <= v and receive the precomputed
exponentials e_m = exp(-c(u+v)/t), e_d = exp(c(u-v)/t),
e_p = exp(c(u+v-2)/t), whose arguments are non-positive on the domain.
"""
import numpy

SQRT3 = numpy.sqrt(3.0)
SQRT5 = numpy.sqrt(5.0)

def w12(u, v, t, c, e_m, e_d, e_p):
    x0 = (1/2)*t
    return e_d*(t - u + v) - e_m*x0 - e_p*x0

def dwdu12(u, v, t, c, e_m, e_d, e_p):
    return -e_d*(u - v)/t + (1/2)*e_m - 1/2*e_p

def dwdv12(u, v, t, c, e_m, e_d, e_p):
    return e_d*(u - v)/t + (1/2)*e_m - 1/2*e_p

def w32(u, v, t, c, e_m, e_d, e_p):
    x0 = 9*u
    x1 = 9*v
    x2 = numpy.sqrt(3)
    x3 = 5*t*x2
    x4 = x2/t
    x5 = 6*x4
    x6 = u*x5
    x7 = v*x6 + x3
    x8 = t**(-2.0)
    x9 = 3*x8
    x10 = v**2
    x11 = u**2
    return (1/6)*e_d*(-u**3*x9 - 12*u*v*x4 - 15*u + v**3*x9 + 15*v - x0*x10*x8 + x1*x11*x8 + x10*x5 + x11*x5 + x3) - 1/12*e_m*(x0 + x1 + x7) - 1/12*e_p*(-v*x5 - x0 - x1 + x5 - x6 + x7 + 18)

def dwdu32(u, v, t, c, e_m, e_d, e_p):
    x0 = numpy.sqrt(3)
    x1 = t**(-1.0)
    x2 = 2*x1
    x3 = v*x2
    x4 = 3*x1
    x5 = v*x1
    x6 = x0*x5
    x7 = x6 + 2
    x8 = v*x4
    x9 = u*x1
    return (1/4)*e_d*x2*(-u*(x0 + x7*x8 - x9*(x0*x8 - x0*x9 + 3)) + v*(x0 + x5*(x6 + 3))) + (1/4)*e_m*(u*x4*(x0 + x3) + x7) + (1/4)*e_p*(3*u*x1*(x0 + x2 - x3) + v*x1*(x0 + 6*x1) - x2*(2*x0 + x4) - 2)

def dwdv32(u, v, t, c, e_m, e_d, e_p):
    x0 = numpy.sqrt(3)
    x1 = t**(-1.0)
    x2 = 3*x1
    x3 = v*x2
    x4 = x0*x3
    x5 = 6*x1
    x6 = v*x5
    x7 = u*x1
    x8 = 2*x1
    x9 = v*x1
    x10 = x0*x9
    return (1/4)*e_d*x8*(u*(x0 + x3*(x10 + 2) - x7*(-x0*x7 + x4 + 3)) - v*(x0 + x9*(x10 + 3))) + (1/4)*e_m*(x4 + x7*(x0 + x6) + 2) + (1/4)*e_p*(u*x1*(x0 + x5 - x6) + 3*v*x1*(x0 + x8) - x8*(2*x0 + x2) - 2)

def w52(u, v, t, c, e_m, e_d, e_p):
    x0 = 225*u
    x1 = 225*v
    x2 = v**2
    x3 = t**(-2.0)
    x4 = 200*x3
    x5 = x2*x4
    x6 = u*x5
    x7 = u**2
    x8 = x4*x7
    x9 = v*x8
    x10 = numpy.sqrt(5)
    x11 = t*x10
    x12 = t**(-1.0)
    x13 = 50*x10
    x14 = x12*x13
    x15 = t**(-3.0)
    x16 = x13*x15
    x17 = x16*x7
    x18 = x10*x12
    x19 = u*v
    x20 = x18*x19
    x21 = 63*x11 + x14*x2 + x14*x7 + x17*x2 + 170*x20
    x22 = t**(-4.0)
    x23 = 25*x22
    x24 = u**3
    x25 = 525*x3
    x26 = v**3
    x27 = v**4
    x28 = 125*x22
    x29 = u**4
    x30 = u*x3
    x31 = x10*x15
    x32 = 75*x31
    x33 = 420*x18
    x34 = 250*x22
    x35 = 300*x31
    x36 = 600*x3
    x37 = 270*x18
    x38 = 100*x31
    x39 = u*x38
    x40 = v*x38
    return (1/270)*e_d*(-u**5*x23 - u*x26*x35 - u*x27*x28 - 945*u + v**5*x23 - v*x24*x35 + v*x28*x29 + 1575*v*x3*x7 + 945*v + 189*x11 - x2*x24*x34 - 1575*x2*x30 + 450*x2*x31*x7 + x2*x33 - 840*x20 - x24*x25 + x25*x26 + x26*x34*x7 + x27*x32 + x29*x32 + x33*x7) - 1/180*e_m*(x0 + x1 + x21 + x6 + x9) - 1/180*e_p*(-u*x36 - u*x37 + 800*v*x30 - v*x36 - v*x37 - x0 - x1 + x16*x2 + x16 + x17 + 200*x19*x31 - x2*x39 + x21 + 400*x3 + x37 - x39 - x40*x7 - x40 + x5 - x6 + x8 - x9 + 450)

def dwdu52(u, v, t, c, e_m, e_d, e_p):
    x0 = numpy.sqrt(5)
    x1 = 11*x0
    x2 = t**(-1.0)
    x3 = 10*x2
    x4 = v*x3
    x5 = v*x2
    x6 = 5*x0
    x7 = 2*x0
    x8 = 2*x5
    x9 = 4*x0
    x10 = 5*x2
    x11 = v*x10
    x12 = 2*x2
    x13 = u*x12
    x14 = 21*x0
    x15 = 9*x0
    x16 = x0*x5
    x17 = 27*x0
    x18 = u*x2
    x19 = x2*(x10 + x9)
    return (1/108)*e_d*x12*(u*(5*u*x2*(-x18*(x15 - x18*(-x0*x18 + x5*x6 + 10) + x4*(x16 + 4)) + x5*(x17 + x4*(x16 + 6)) + 21) - x11*(x5*(x11*(x16 + 8) + x17) + 42) - x14) + v*(x11*(x5*(x15 + x5*(x16 + 10)) + 21) + x14)) + (1/36)*e_m*(u*x10*(x13*(x5*(x11 + x9) + 5) + x6 + x8*(x5*x7 + 9)) + x5*(x1 + x4) + 18) + (1/36)*e_p*(5*u*x2*(x12*(x3*(x0 + x2) + 19) + x13*(v*x2*(-x11 + x3 + x9) - x19 - 5) + x6 - x8*(4*x2*(3*x0 + x10) - x8*(x0 + x10) + 9)) + v*x2*(x1 + x3*(2*x19 + 11) - x4*(x2*(x10 + x7) + 1)) - x12*(18*x0 + x10*(x2*(6*x0 + x10) + 15)) - 18)

def dwdv52(u, v, t, c, e_m, e_d, e_p):
    x0 = numpy.sqrt(5)
    x1 = t**(-1.0)
    x2 = v*x1
    x3 = 2*x2
    x4 = 11*x0
    x5 = 4*x0
    x6 = 10*x1
    x7 = v*x6
    x8 = 2*x0
    x9 = 5*x1
    x10 = v*x9
    x11 = u*x6
    x12 = u*x1
    x13 = 21*x0
    x14 = 9*x0
    x15 = x0*x2
    x16 = 27*x0
    x17 = 2*x1
    x18 = x1*(x5 + x9)
    x19 = x1*(x8 + x9)
    return (1/108)*e_d*x17*(u*(u*x9*(u*x1*(-x12*(x0*x10 - x0*x12 + 10) + x14 + x7*(x15 + 4)) - x2*(x16 + x7*(x15 + 6)) - 21) + x10*(x2*(x10*(x15 + 8) + x16) + 42) + x13) - v*(x10*(x2*(x14 + x2*(x15 + 10)) + 21) + x13)) + (1/36)*e_m*(x12*(x11*(x2*(x10 + x8) + 1) + x4 + x7*(x2*x5 + 9)) + 25*x2*(x0 + x3) + 18) + (1/36)*e_p*(u*x1*(x11*(v*x1*(-x10 + x6 + x8) - x19 - 1) + x4 + x6*(2*x18 + 11) - x7*(-2*v*x19 + 4*x1*(3*x0 + x9) + 9)) + 5*v*x1*(5*x0 + x17*(x6*(x0 + x1) + 19) - x3*(x18 + 5)) - x17*(18*x0 + x9*(x1*(6*x0 + x9) + 15)) - 18)
