"""Knowledge-tracing LSTM training, influence-graph extraction, and
causal-subset experiments over student interaction logs."""

__version__ = "0.1.0"
