"""Camera-LiDAR redundancy ratio and distance-threshold pruning.

A baseline (fusion-style) detection set is compared against a partial
LiDAR-only set: the redundancy ratio counts baseline boxes matched at
IoU >= theta.  Sweeping a centroid-distance threshold then shows the
classic pruning trade-off: boxes removed vs. baseline detections lost.

Run:  python demos/03_multimodal_redundancy.py
"""

from dqav import (SynthSpec, generate_synthetic, nuscenes_like_rig,
                  redundancy_ratio, sweep_distance)

spec = SynthSpec(seed=3, frames=30, objects_per_frame=(3, 8),
                 distance_range=(6.0, 55.0), shared_prob=0.5,
                 rig=nuscenes_like_rig(), lidar_match_prob=0.6)
result = generate_synthetic(spec)

lidar_by_frame = {s.frame_id: s for s in result.lidar_sets}

print("frame        rr     matched/base")
for base in result.base_sets[:10]:
    r = redundancy_ratio(base, lidar_by_frame[base.frame_id], theta=0.5)
    rr = "  n/a" if r.rr is None else f"{r.rr:5.2f}"
    print(f"{base.frame_id}  {rr}   {len(r.matched)}/{len(base.boxes)}")
print()

# Distance sweep on one frame: everything inside t_dist is treated as
# cross-modally redundant and dropped; the lost ratio tracks how much of
# the baseline that sacrifices.  Point counts show the same filter
# applied to the raw cloud.
frame_id = result.base_sets[0].frame_id
points = result.point_clouds[frame_id]
outcomes = sweep_distance(result.base_sets[0], lidar_by_frame[frame_id],
                          t_values=[0.0, 10.0, 20.0, 30.0, 40.0, 60.0],
                          theta=0.5, points=points)

print(f"distance sweep on {frame_id} ({len(points)} points)")
print("t_dist  boxes_kept  points_kept  lost_ratio    rr")
for o in outcomes:
    rr = "   n/a" if o.rr is None else f"{o.rr:6.2f}"
    print(f"{o.t_dist:6.1f}  {o.boxes_retained:10d}  {o.points_retained:11d}"
          f"  {o.lost_ratio:10.2f}  {rr}")
