"""Walk through the rig geometry: camera FoVs, the six overlap pairs and
the pixel crop bands each pair induces.

Run:  python demos/01_overlap_pairs.py
"""

from dqav import find_overlap_pairs, fov_interval, nuscenes_like_rig

rig = nuscenes_like_rig()

print("Cameras and their horizontal fields of view")
print("-" * 60)
for cam in rig.cameras:
    iv = fov_interval(cam)
    print(f"  {cam.name:16s} yaw {cam.yaw_deg:7.1f}  hfov {cam.hfov_deg:5.1f}  "
          f"-> [{iv.start_deg:7.1f}, {iv.end_deg:7.1f}] deg")

# Every unordered pair whose FoV arcs intersect becomes an overlap pair.
# The classic six-camera layout gives four 15-degree overlaps at the
# front/side seams and two 20-degree overlaps against the rear camera.
pairs = find_overlap_pairs(rig)

print()
print(f"{len(pairs)} overlap pairs")
print("-" * 60)
for p in pairs:
    print(f"  {p.cam_a:16s} | {p.cam_b:16s} "
          f"overlap {p.overlap.width_deg:5.1f} deg "
          f"[{p.overlap.start_deg:7.1f}, {p.overlap.end_deg:7.1f}]")

# The same wedge lands in a different column band of each camera image.
# Columns follow the pinhole map col = cx - fx * tan(angle): an object on
# a camera's left FoV edge sits at column 0, on the right edge at width.
print()
print("Crop bands (pixel columns, 1600 px wide images)")
print("-" * 60)
for p in pairs:
    print(f"  {p.cam_a:16s} cols [{p.crop_a[0]:7.1f}, {p.crop_a[1]:7.1f})   "
          f"{p.cam_b:16s} cols [{p.crop_b[0]:7.1f}, {p.crop_b[1]:7.1f})")
