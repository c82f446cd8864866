"""CardioVAE - Unsupervised Heart/Lung Sound Separation

A variational autoencoder trained on spectrogram frames of mixed cardiopulmonary
audio. Source structure is discovered in the latent space and the individual
heart and lung signals are rebuilt by decoding distinct latent regions.
"""

__version__ = "0.1.0"
__author__ = "CardioVAE Team"
__description__ = "Unsupervised heart and lung sound separation with variational autoencoders"
