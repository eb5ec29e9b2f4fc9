"""JSON schemas shipped with emslab."""
