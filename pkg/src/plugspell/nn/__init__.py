from .core import EncoderConfig, Parameter, cast_params, init_base_params, init_encoder_stack

__all__ = [
    "EncoderConfig",
    "Parameter",
    "cast_params",
    "init_base_params",
    "init_encoder_stack",
]
