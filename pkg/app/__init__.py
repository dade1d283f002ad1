# Slab Boussinesq spectral toolkit