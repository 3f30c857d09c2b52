"""DGA domain detection: entropy/length Random Forest baseline and a
character-level LSTM, with the dataset tooling to compare them."""

__version__ = "0.1.0"
