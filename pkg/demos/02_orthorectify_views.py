"""
Cutting left and right views out of a 360 degree frame
======================================================
"""
import numpy as np

from svipipe.orthorect import DEFAULT_VIEWS, coverage_fraction, gnomonic_ray, orthorectify

# A synthetic panorama: hue follows longitude, brightness follows latitude.
H, W = 512, 1024
v, u = np.mgrid[0:H, 0:W]
pano = np.stack([
    (u * 255 // W),
    (255 - v * 255 // H),
    np.full_like(u, 128),
], axis=-1).astype(np.uint8)

for spec in DEFAULT_VIEWS:
    view = orthorectify(pano, spec, "demo")
    lon, lat = gnomonic_ray(spec.out_width / 2, spec.out_height / 2, spec)
    print(f"{spec.side.value}: {view.width}x{view.height}, centre looks at lon={np.degrees(lon):+.1f} deg, "
          f"mean red={view.pixels[..., 0].mean():.1f}")

# the left view should be reddish-dark (lon near -90), the right one brighter red
cov = coverage_fraction(DEFAULT_VIEWS, 500_000)
print(f"both views together see {cov:.1%} of the sphere")

# Saving a view is one call; uncomment to look at it.
# from svipipe.orthorect import save_view
# save_view(view, "right.png")
