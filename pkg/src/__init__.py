"""Source Package."""
