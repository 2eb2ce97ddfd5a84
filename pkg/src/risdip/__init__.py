"""Channel estimation for RIS-assisted multi-user OFDM with an untrained DNN denoiser."""

__version__ = "0.1.0"
