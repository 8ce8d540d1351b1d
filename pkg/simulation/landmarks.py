"""Seeded landmark field: a textured wall patch around the target plus a floor plane."""
import numpy as np

from models.schemas import LandmarkSettings, WallModel

UP = np.array([0.0, 0.0, 1.0])


def wall_tangents(wall: WallModel):
    """In-plane unit axes of the wall: horizontal (normal x up) and vertical."""
    n = wall.normal_vector
    t1 = np.cross(n, UP)
    norm = np.linalg.norm(t1)
    if norm < 1e-9:
        t1 = np.cross(n, np.array([1.0, 0.0, 0.0]))
        norm = np.linalg.norm(t1)
    t1 = t1 / norm
    t2 = np.cross(t1, n)
    return t1, t2


def generate_landmark_field(wall: WallModel, settings: LandmarkSettings,
                            rng: np.random.Generator) -> np.ndarray:
    """
    Scatter landmarks uniformly on the wall patch and on the floor in front of it.

    Points falling on the circular target are dropped, so the target itself
    carries no texture. Row index of the result is the landmark id.

    Args:
        wall: Wall geometry
        settings: Densities [1/m^2] and extents [m]
        rng: Generator owned by the landmark stream

    Returns:
        Array of shape (N, 3) with world-frame positions
    """
    t1, t2 = wall_tangents(wall)
    origin = np.asarray(wall.point, dtype=float)
    hole = np.asarray(wall.hole_center, dtype=float)

    (y_lo, y_hi), (z_lo, z_hi) = settings.wall_extent_y, settings.wall_extent_z
    wall_count = int(round(settings.wall_density * (y_hi - y_lo) * (z_hi - z_lo)))
    a = rng.uniform(y_lo, y_hi, wall_count)
    b = rng.uniform(z_lo, z_hi, wall_count)
    wall_points = origin + np.outer(a, t1) + np.outer(b, t2)
    off_target = np.linalg.norm(wall_points - hole, axis=1) > wall.target_outer_radius
    wall_points = wall_points[off_target]

    f_lo, f_hi = settings.floor_extent_y
    floor_count = int(round(settings.floor_density * settings.floor_depth * (f_hi - f_lo)))
    s = rng.uniform(0.0, settings.floor_depth, floor_count)
    c = rng.uniform(f_lo, f_hi, floor_count)
    floor_points = origin + np.outer(s, wall.normal_vector) + np.outer(c, t1)
    floor_points[:, 2] = 0.0

    return np.vstack((wall_points.reshape(-1, 3), floor_points.reshape(-1, 3)))
