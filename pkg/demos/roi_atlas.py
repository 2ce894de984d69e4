"""Draw the region atlas on a small grid.

Image rows run anterior (top) to posterior, and image columns run from the
patient's right (left edge) to their left. Pixels outside the default
inscribed-disc lung field belong to no region.
"""

from eitml.atlas import MIRROR, PARTITIONS, build_atlas

atlas = build_atlas(16, 16)


def show(name):
    mask = atlas.mask(name)
    print(f"{name} ({int(mask.sum())} px, mirror: {MIRROR[name]})")
    for r in range(atlas.height):
        row = ""
        for c in range(atlas.width):
            row += "#" if mask[r, c] else ("." if atlas.lung_field[r, c] else " ")
        print("  " + row)


for name in ("global", "quadrant1", "horizontalMP", "verticalL"):
    show(name)

print("partition families (each covers the lung field exactly once):")
for family, members in PARTITIONS.items():
    print(f"  {family:20s} {', '.join(members)}")
