"""reface3d: 3D cGAN refacing of defaced T1w MRI plus de-identification evaluation."""

__version__ = "0.1.0"

from .nifti import NiftiImage, make_image, read_nifti, reorient_asl, write_nifti

__all__ = [
    "NiftiImage",
    "__version__",
    "make_image",
    "read_nifti",
    "reorient_asl",
    "write_nifti",
]
