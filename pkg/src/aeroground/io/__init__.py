"""File formats: binary PGM rasters, key=value text, pair manifests."""
