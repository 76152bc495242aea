"""Random affine interval IFS: maps, skew products, walks and stationary measures."""
