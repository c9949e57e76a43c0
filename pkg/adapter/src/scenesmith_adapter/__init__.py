"""Reference tool server for the scenesmith wire protocol.

Serves every /v1/* tool route against a pluggable generation backend,
decodes the engine's guidance artifacts (attention bias grids, region
masks, condition images), and maps character token spans onto backend
token indices.  The bundled procedural backend is model-free; real
diffusion or VQA backends plug in behind the same interface.
"""

__version__ = "0.1.0"

from .backend import ProceduralBackend
from .server import create_app

__all__ = ["ProceduralBackend", "create_app", "__version__"]
