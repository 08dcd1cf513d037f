"""Minimal-sensing swarm aggregation: continuous and lattice simulators, metrics and bounds."""
from .cone import (BoundCheck, c_prime, d_prime, gamma_exact_lb, gamma_linear_lb, p_j_position,
                   rotation_bound, rotation_bound_exact, simulate_one_revolution,
                   solve_alpha_gamma, verify_bound_by_simulation)
from .constructions import (gen_deadlock_even, gen_deadlock_odd, gen_random, gen_ring_deadlock,
                            gen_symmetric_cycle)
from .continuous import (X_STAR, Controller, NoiseModel, PhysicsParams, World, advance,
                         body_twist, orbit_radius, resolve_contacts, run, sense, step)
from .experiments import CUTOFF, ExperimentSpec, RunRecord, detect_aggregation, sweep
from .geometry import (Disc, MetricsSample, cluster_fraction, compute_metrics,
                       convex_hull_perimeter, dispersion, min_dispersion_baseline,
                       smallest_enclosing_disc)
from .lattice import (AxialCoord, DiscreteNoise, LatticeRobot, LatticeWorld, activate,
                      axial_to_cartesian, center_of_rotation, cone_contains, random_lattice_world,
                      run_rounds, sense_discrete)

__version__ = "0.1.0"
