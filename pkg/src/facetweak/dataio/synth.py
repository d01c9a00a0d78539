"""
Synthetic multi-pose face generator.

Each face is a 5-point template posed by its mode (in-plane rotation, yaw
shift of the inner features, scale, offset), jittered, and rendered as a
skin-toned ellipse with dark blobs at the landmarks over a textured
background. Ground truth is exact: the landmarks are the posed template
mapped through the face's recorded transform.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
from PIL import Image
from scipy import ndimage

from ..errors import ConfigError
from ..exporters.json_exporter import JSONExporter
from ..utils.file_utils import ensure_dir, sha256_files
from ..utils.seeding import stream
from .annotations import ATTRIBUTE_NAMES, AnnotationParser, AnnotationRecord
from .dataset import LandmarkDataset, MANIFEST_NAME
from .preprocess import CROP_SIZE, NormalizationStats

logger = logging.getLogger(__name__)

# left eye, right eye, nose, left mouth corner, right mouth corner
TEMPLATE = np.array([
    [0.33, 0.38],
    [0.67, 0.38],
    [0.50, 0.57],
    [0.37, 0.75],
    [0.63, 0.75],
])
CENTER = np.array([0.5, 0.5])
FACE_AXES = (0.34, 0.45)
FACE_CENTER_Y = 0.55
# eyeglasses base rate matches large annotated face collections
ATTRIBUTE_RATES = {'male': 0.5, 'smiling': 0.5, 'eyeglasses': 0.153}

ANNOTATION_NAME = 'annotations.txt'
IMAGE_DIR = 'images'


@dataclass(frozen=True)
class PoseMode:
    rotation: float = 0.0
    yaw: float = 0.0
    scale: float = 1.0
    shift: Tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class FaceTransform:
    """``p' = scale * R(rotation) (p - c) + c + (tx, ty)`` about the box centre ``c``."""
    scale: float
    rotation: float
    tx: float
    ty: float

    def matrix(self) -> np.ndarray:
        theta = np.deg2rad(self.rotation)
        c, s = np.cos(theta), np.sin(theta)
        return self.scale * np.array([[c, -s], [s, c]])

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return (pts - CENTER) @ self.matrix().T + CENTER + np.array([self.tx, self.ty])

    def invert(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64) - CENTER - np.array([self.tx, self.ty])
        return pts @ np.linalg.inv(self.matrix()).T + CENTER


@dataclass
class SyntheticFace:
    image: np.ndarray
    landmarks: np.ndarray
    mode: int
    attributes: np.ndarray
    transform: FaceTransform
    template: np.ndarray = field(repr=False, default=None)


def pose_modes(count: int) -> List[PoseMode]:
    """Evenly spread poses from left-tilted/left-turned to right-tilted/right-turned."""
    if count < 1:
        raise ConfigError(f"Need at least one pose mode, got {count}")
    if count == 1:
        return [PoseMode()]
    modes = []
    for k in range(count):
        u = -1.0 + 2.0 * k / (count - 1)
        modes.append(PoseMode(rotation=30.0 * u, yaw=0.10 * u, scale=1.0 - 0.05 * abs(u), shift=(0.03 * u, 0.0)))
    return modes


def posed_template(yaw: float) -> np.ndarray:
    """Template with inner features shifted sideways by a head turn."""
    pts = TEMPLATE.copy()
    pts[0:2, 0] += 0.35 * yaw
    pts[2, 0] += yaw
    pts[3:5, 0] += 0.6 * yaw
    return pts


def _segment_distance(q: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    t = np.clip(((q - a) @ ab) / max(float(ab @ ab), 1e-12), 0.0, 1.0)
    return np.linalg.norm(q - (a + t[..., np.newaxis] * ab), axis=-1)


def _blob(d: np.ndarray, sigma: float) -> np.ndarray:
    return np.exp(-0.5 * (d / sigma) ** 2)


def render_face(
    template: np.ndarray,
    transform: FaceTransform,
    yaw: float,
    attributes: Dict[str, bool],
    rng: np.random.Generator,
    size: int = CROP_SIZE,
) -> np.ndarray:
    """
    Draw one face. Feature geometry is evaluated in the template frame, so
    blobs land exactly on the transformed landmarks.

    Returns:
        ``size×size×3`` uint8 image
    """
    centres = (np.arange(size) + 0.5) / size
    gx, gy = np.meshgrid(centres, centres, indexing='xy')
    grid = np.stack([gx, gy], axis=-1)
    q = transform.invert(grid.reshape(-1, 2)).reshape(size, size, 2)

    noise = ndimage.gaussian_filter(rng.normal(size=(size, size, 3)), sigma=(3, 3, 0))
    noise /= max(float(noise.std()), 1e-12)
    background = rng.uniform(40, 160, size=3) + 25.0 * noise

    cx = 0.5 + 0.3 * yaw
    ax, ay = FACE_AXES
    d = ((q[..., 0] - cx) / ax) ** 2 + ((q[..., 1] - FACE_CENTER_Y) / ay) ** 2
    mask = 1.0 / (1.0 + np.exp(-12.0 * (1.0 - d)))
    skin = np.array([190.0, 150.0, 120.0]) + rng.uniform(-25, 25, size=3)
    face = np.broadcast_to(skin, (size, size, 3)).copy()
    if attributes['male']:
        face[q[..., 1] > 0.66] *= 0.85

    dark = np.zeros((size, size))
    for eye in template[0:2]:
        dark += 120.0 * _blob(np.linalg.norm(q - eye, axis=-1), 0.035)
    dark += 50.0 * _blob(np.linalg.norm(q - template[2], axis=-1), 0.04)
    for corner in template[3:5]:
        dark += 70.0 * _blob(np.linalg.norm(q - corner, axis=-1), 0.03)
    left, right = template[3], template[4]
    middle = (left + right) / 2.0 + np.array([0.0, 0.04 if attributes['smiling'] else 0.0])
    lip = np.minimum(_segment_distance(q, left, middle), _segment_distance(q, middle, right))
    dark += 60.0 * _blob(lip, 0.015)
    if attributes['eyeglasses']:
        for eye in template[0:2]:
            ring = np.abs(np.linalg.norm(q - eye, axis=-1) - 0.085)
            dark += 100.0 * _blob(ring, 0.012)
        bridge = _segment_distance(q, template[0] + [0.085, 0.0], template[1] - [0.085, 0.0])
        dark += 100.0 * _blob(bridge, 0.012)

    face = face - dark[..., np.newaxis] * np.array([1.0, 1.1, 1.1])
    image = background * (1.0 - mask[..., np.newaxis]) + face * mask[..., np.newaxis]
    image += rng.normal(0.0, 3.0, size=image.shape)
    return np.clip(np.round(image), 0, 255).astype(np.uint8)


def synth_generate(n: int, modes: int, seed: int, jitter: float = 1.0, size: int = CROP_SIZE) -> List[SyntheticFace]:
    """
    Generate ``n`` annotated synthetic faces.

    Args:
        n: Number of faces
        modes: Number of pose modes
        seed: Run seed (faces come from the ``synth`` stream)
        jitter: Scale of the within-mode pose noise; 0 gives one exact pose per mode
        size: Image side length

    Returns:
        List[SyntheticFace]: faces in generation order
    """
    if n < 1:
        raise ConfigError(f"Need n >= 1 faces, got {n}")
    if jitter < 0:
        raise ConfigError(f"jitter must be >= 0, got {jitter}")
    poses = pose_modes(modes)
    rng = stream(seed, 'synth')
    faces = []
    for _ in range(n):
        mode = int(rng.integers(len(poses)))
        pose = poses[mode]
        attrs = {name: bool(rng.random() < ATTRIBUTE_RATES[name]) for name in ATTRIBUTE_NAMES}
        noise = rng.normal(size=5) * jitter
        yaw = pose.yaw + 0.01 * noise[0]
        transform = FaceTransform(
            scale=pose.scale * (1.0 + 0.02 * noise[1]),
            rotation=pose.rotation + 2.0 * noise[2],
            tx=pose.shift[0] + 0.01 * noise[3],
            ty=pose.shift[1] + 0.01 * noise[4],
        )
        template = posed_template(yaw)
        image = render_face(template, transform, yaw, attrs, rng, size)
        faces.append(SyntheticFace(
            image=image,
            landmarks=transform.apply(template),
            mode=mode,
            attributes=np.array([int(attrs[a]) for a in ATTRIBUTE_NAMES], dtype=np.int64),
            transform=transform,
            template=template,
        ))
    logger.debug(f"Generated {n} synthetic faces over {len(poses)} pose modes")
    return faces


def faces_to_dataset(faces: Sequence[SyntheticFace], stats: NormalizationStats = None) -> LandmarkDataset:
    """In-memory dataset equivalent to writing the faces and loading them back."""
    raw = np.stack([f.image.astype(np.float64) for f in faces])
    stats = stats or NormalizationStats.from_images(raw)
    return LandmarkDataset.from_arrays(
        stats.normalize(raw),
        np.stack([f.landmarks for f in faces]),
        stats=stats,
        attributes=np.stack([f.attributes for f in faces]),
        paths=[f"{IMAGE_DIR}/{i:06d}.png" for i in range(len(faces))],
        modes=[f.mode for f in faces],
    )


def write_synthetic_dataset(
    faces: Sequence[SyntheticFace],
    out_dir: Union[str, Path],
    seed: int,
    modes: int,
    jitter: float = 1.0,
) -> Dict:
    """
    Write PNG images, ``annotations.txt`` and ``manifest.json`` into ``out_dir``.

    Boxes cover the whole image, so pixel landmarks are ``x * size``.

    Returns:
        dict: The manifest
    """
    out_dir = ensure_dir(out_dir)
    ensure_dir(out_dir / IMAGE_DIR)
    records, image_paths = [], []
    for i, face in enumerate(faces):
        rel = f"{IMAGE_DIR}/{i:06d}.png"
        path = out_dir / rel
        Image.fromarray(face.image).save(path, format='PNG')
        image_paths.append(path)
        h, w = face.image.shape[:2]
        records.append(AnnotationRecord(
            image_path=rel,
            box=(0.0, 0.0, float(w), float(h)),
            landmarks=face.landmarks * np.array([w, h]),
            attributes=tuple(int(a) for a in face.attributes),
        ))
    annotation_path = AnnotationParser().write(records, out_dir / ANNOTATION_NAME)

    manifest = {
        'annotation_file': ANNOTATION_NAME,
        'attributes': list(ATTRIBUTE_NAMES),
        'checksum': sha256_files([annotation_path] + image_paths),
        'count': len(records),
        'jitter': float(jitter),
        'landmarks': int(faces[0].landmarks.shape[0]) if faces else 0,
        'modes': [int(f.mode) for f in faces],
        'pose_modes': int(modes),
        'seed': int(seed),
    }
    JSONExporter().export(manifest, str(out_dir / MANIFEST_NAME))
    logger.info(f"Wrote {len(records)} synthetic faces to {out_dir}")
    return manifest
