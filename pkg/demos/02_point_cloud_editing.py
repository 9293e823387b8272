"""Lift an edited frame into a colored point cloud and render guidance views.

Back-projecting the merged edited depth through the editing camera gives the
edited point cloud; splatting it under every frame's camera produces the
per-frame guidance images a video generator consumes.
"""

from pathlib import Path

from edit3d import io as eio
from edit3d import synth as sy
from edit3d.geometry import backproject
from edit3d.render import render_sequence

out_dir = Path(__file__).parent / "out" / "point_cloud_editing"
out_dir.mkdir(parents=True, exist_ok=True)

spec = sy.deep_box_scene(frames=8)
gt = sy.render_ground_truth(spec)
edited = sy.render_edited_ground_truth(spec)

# the edited first frame and its (here: exact) depth become a world point cloud
cloud = backproject(edited.depths[0], edited.frames[0], gt.cameras[0])
print(f"edited cloud: {len(cloud)} points from frame 1")

frames = render_sequence(cloud, gt.cameras, splat_radius=1)
for i, rf in enumerate(frames):
    eio.write_image_png(out_dir / (eio.PCR_NAME % i), rf.color)
    eio.write_pfm(out_dir / (eio.PCR_DEPTH_NAME % i), rf.depth)
    eio.write_mask_png(out_dir / (eio.COVERAGE_NAME % i), rf.coverage)
    holes = 1.0 - rf.coverage.bits.mean()
    print(f"frame {i}: coverage {100 * (1 - holes):5.1f}%  (disocclusion holes {100 * holes:4.1f}%)")

print(f"guidance renders written to {out_dir}")
