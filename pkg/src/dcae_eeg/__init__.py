"""Deep convolutional autoencoder for scalp EEG, with its signal pipeline.

Subpackages and modules:

* :mod:`dcae_eeg.signal_io` - EDF subset reader/writer and the tensor file format
* :mod:`dcae_eeg.preprocess` - channel cleaning, resampling, IIR filters, montage
* :mod:`dcae_eeg.windowing` - windows, plausibility screen, histogram scaler, flips
* :mod:`dcae_eeg.spectral` - Fourier and STFT magnitudes, band masks, normalization
* :mod:`dcae_eeg.nn` - a small reverse-mode autodiff engine and layers
* :mod:`dcae_eeg.dcae` - the autoencoder, its losses, training and evaluation
* :mod:`dcae_eeg.synthgen` - synthetic EDF corpora
* :mod:`dcae_eeg.cli` - the ``dcae-eeg`` command
"""

__version__ = "0.1.0"
