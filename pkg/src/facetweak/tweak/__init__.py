from .tweaked_model import HeadReport, TweakBuilder, TweakedModel, build_tweaked, predict_tweaked, route

__all__ = [
    "HeadReport",
    "TweakBuilder",
    "TweakedModel",
    "build_tweaked",
    "predict_tweaked",
    "route",
]
