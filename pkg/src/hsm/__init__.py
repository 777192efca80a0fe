"""Hard-core and hard-sphere partition functions via clique dynamics."""
