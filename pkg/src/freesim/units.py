"""Boundary unit conversions. Everything inside the package is SI and radians."""

import math

PA_PER_PSI = 6894.757
GRAVITY = 9.81


def psi_to_pa(p):
    return p * PA_PER_PSI


def pa_to_psi(p):
    return p / PA_PER_PSI


def deg_to_rad(a):
    return math.radians(a)


def rad_to_deg(a):
    return math.degrees(a)
