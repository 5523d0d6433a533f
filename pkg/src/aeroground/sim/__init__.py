"""Two-agent drone / ground-robot collaboration simulator."""
