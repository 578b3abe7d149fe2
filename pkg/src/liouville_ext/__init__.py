"""Extremal length, geodesic flow and Liouville approximants on closed hyperbolic surfaces.

Modules:

* ``geometry``: Poincare disk isometries and the hyperboloid model;
* ``surface``: the regular 4g-gon presentation, words and closed geodesic lengths;
* ``flow``: geodesic flow, closed curves g_T(v) and approximants G_T(v);
* ``metrics``: conformal densities, areas, lengths and ergodic averages;
* ``mesh``: triangulations of the surface and flat test fixtures;
* ``discrete``: discrete extremal length and extremal edge metrics;
* ``diameter``: diameters, the pants constant and the singular example;
* ``experiments``, ``config``, ``cli``: the experiment driver.
"""

__version__ = "0.1.0"
