"""Write the geodesic unit-sphere meshes used by the meshed-surface configs.

    python scripts/make_sphere_meshes.py [outdir]

Files are named ``sphere_f{frequency}_o{order}.msh`` (Gmsh MSH 4.1 ASCII).
"""

import sys
from pathlib import Path

from dimbie.mesh import write_icosphere

# (frequency, element order): flat and cubic meshes for the Neumann runs,
# three cubic levels for the elastodynamic self-convergence run
MESHES = [(4, 1), (4, 3), (7, 3), (2, 3), (3, 3), (4, 3), (6, 3)]


def main(outdir=None):
    out = Path(outdir) if outdir else Path(__file__).parent / "meshes"
    out.mkdir(parents=True, exist_ok=True)
    for freq, order in dict.fromkeys(MESHES):
        path = write_icosphere(out / f"sphere_f{freq}_o{order}.msh", freq, order)
        print(path)


if __name__ == "__main__":
    main(*sys.argv[1:])
