"""Green's functions on the torus and the critical inverse temperature.

Run with ``python3 demos/01_greens_and_beta_c.py``. Everything here is
deterministic and finishes in a few seconds.
"""

from torusgff import (TorusLattice, beta_c, build_spectrum, massive_green, solve_torus_mass,
                      solve_zd_mass, zd_green, zd_green_series, zero_average_green)

# The Laplacian has no 1/(2d) factor, so the critical point in d = 3 is
# G_{Z^3}(0,0) itself. Two independent evaluations agree to about 1e-10.
quad = zd_green(3, 0.0)
series = zd_green_series(3, 0.0)
print(f"beta_c(3): quadrature {quad:.12f}  walk series {series:.12f}")

# Low-lying spectrum of -Lap on the 8^3 torus, with multiplicities.
vals, mult = build_spectrum(TorusLattice(3, 8)).multiplicities()
print("smallest eigenvalues:", ", ".join(f"{v:.4f} (x{m})" for v, m in zip(vals[:4], mult[:4])))

# The zero-average Green's function sits below beta_c on the diagonal, and the
# gap closes like 1/n.
print("\n n   G0avg(0,0)   n*(G0avg(0,0) - beta_c)")
for n in (8, 16, 32):
    g = zero_average_green(TorusLattice(3, n)).value(0, 0)
    print(f"{n:3d}   {g:.6f}     {n * (g - quad):+.5f}")

# A massive torus Green's function converges to its Z^3 counterpart quickly.
print("\n n   G_n,m2=0.5(0,0) - G_Z3,m2=0.5(0,0)")
for n in (4, 8, 16):
    print(f"{n:3d}   {massive_green(TorusLattice(3, n), 0.5).value(0, 0) - zd_green(3, 0.5):.3e}")

# The mass equation. Below beta_c the torus mass converges to the Z^3 mass;
# above it the mass collapses like 1/((beta - beta_c) n^3).
m_inf = solve_zd_mass(3, 0.2)
print(f"\nbeta = 0.2: Z^3 mass {m_inf:.8f}")
for n in (8, 16, 32):
    m2 = solve_torus_mass(TorusLattice(3, n), 0.2).m_squared
    print(f"  n = {n:2d}: m2 = {m2:.8f}  (gap {m2 - m_inf:.2e})")
print("beta = 0.5:")
for n in (8, 16, 32):
    m2 = solve_torus_mass(TorusLattice(3, n), 0.5).m_squared
    print(f"  n = {n:2d}: m2 = {m2:.4e}  m2*(beta-beta_c)*n^3 = {m2 * (0.5 - beta_c(3)) * n ** 3:.4f}")
