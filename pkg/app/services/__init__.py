# Simulation, monitoring, decay verification and persistence services