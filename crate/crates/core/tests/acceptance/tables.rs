/// `(target, attack, member accuracy, non-member accuracy, balanced)` as
/// printed in the main comparison table (three decimals).
pub const COMPARISON: &[(&str, &str, f64, f64, f64)] = &[
    ("CIFAR-10 M-1", "gap", 1.000, 0.780, 0.890),
    ("CIFAR-10 M-1", "blackbox", 0.600, 0.480, 0.540),
    ("CIFAR-10 M-1", "boundary", 0.980, 0.920, 0.950),
    ("CIFAR-10 M-1", "sif", 1.000, 0.980, 0.990),
    ("CIFAR-10 M-2", "gap", 1.000, 0.614, 0.807),
    ("CIFAR-10 M-2", "blackbox", 1.000, 0.616, 0.808),
    ("CIFAR-10 M-2", "boundary", 0.994, 0.814, 0.904),
    ("CIFAR-10 M-2", "sif", 0.996, 0.906, 0.951),
    ("CIFAR-10 M-3", "gap", 1.000, 0.414, 0.707),
    ("CIFAR-10 M-3", "blackbox", 1.000, 0.666, 0.833),
    ("CIFAR-10 M-3", "boundary", 0.946, 0.752, 0.849),
    ("CIFAR-10 M-3", "sif", 1.000, 0.818, 0.909),
    ("CIFAR-10 M-4", "gap", 1.000, 0.356, 0.678),
    ("CIFAR-10 M-4", "blackbox", 0.986, 0.646, 0.816),
    ("CIFAR-10 M-4", "boundary", 0.914, 0.684, 0.799),
    ("CIFAR-10 M-4", "sif", 0.989, 0.749, 0.869),
    ("CIFAR-10 M-5", "gap", 1.000, 0.254, 0.627),
    ("CIFAR-10 M-5", "blackbox", 1.000, 0.515, 0.757),
    ("CIFAR-10 M-5", "boundary", 0.950, 0.588, 0.769),
    ("CIFAR-10 M-5", "sif", 0.987, 0.639, 0.813),
    ("CIFAR-10 M-6", "gap", 1.000, 0.244, 0.622),
    ("CIFAR-10 M-6", "blackbox", 0.886, 0.631, 0.758),
    ("CIFAR-10 M-6", "boundary", 0.970, 0.504, 0.737),
    ("CIFAR-10 M-6", "sif", 0.976, 0.624, 0.800),
    ("CIFAR-10 M-7", "gap", 1.000, 0.231, 0.616),
    ("CIFAR-10 M-7", "blackbox", 1.000, 0.578, 0.789),
    ("CIFAR-10 M-7", "boundary", 0.910, 0.618, 0.764),
    ("CIFAR-10 M-7", "sif", 1.000, 0.553, 0.777),
    ("CIFAR-100 M-1", "gap", 1.000, 1.000, 1.000),
    ("CIFAR-100 M-1", "blackbox", 0.140, 0.780, 0.460),
    ("CIFAR-100 M-1", "boundary", 1.000, 1.000, 1.000),
    ("CIFAR-100 M-1", "sif", 1.000, 1.000, 1.000),
    ("CIFAR-100 M-2", "gap", 1.000, 0.846, 0.923),
    ("CIFAR-100 M-2", "blackbox", 1.000, 0.852, 0.926),
    ("CIFAR-100 M-2", "boundary", 1.000, 0.954, 0.977),
    ("CIFAR-100 M-2", "sif", 0.998, 0.994, 0.996),
    ("CIFAR-100 M-3", "gap", 1.000, 0.763, 0.882),
    ("CIFAR-100 M-3", "blackbox", 1.000, 0.935, 0.967),
    ("CIFAR-100 M-3", "boundary", 0.988, 0.938, 0.963),
    ("CIFAR-100 M-3", "sif", 0.999, 0.982, 0.990),
    ("CIFAR-100 M-4", "gap", 1.000, 0.692, 0.846),
    ("CIFAR-100 M-4", "blackbox", 1.000, 0.913, 0.957),
    ("CIFAR-100 M-4", "boundary", 0.998, 0.896, 0.947),
    ("CIFAR-100 M-4", "sif", 1.000, 0.960, 0.980),
    ("CIFAR-100 M-5", "gap", 1.000, 0.601, 0.801),
    ("CIFAR-100 M-5", "blackbox", 1.000, 0.907, 0.953),
    ("CIFAR-100 M-5", "boundary", 0.974, 0.862, 0.918),
    ("CIFAR-100 M-5", "sif", 1.000, 0.953, 0.976),
    ("CIFAR-100 M-6", "gap", 1.000, 0.535, 0.767),
    ("CIFAR-100 M-6", "blackbox", 0.993, 0.891, 0.942),
    ("CIFAR-100 M-6", "boundary", 0.986, 0.840, 0.913),
    ("CIFAR-100 M-6", "sif", 1.000, 0.932, 0.966),
    ("CIFAR-100 M-7", "gap", 1.000, 0.524, 0.762),
    ("CIFAR-100 M-7", "blackbox", 0.993, 0.861, 0.927),
    ("CIFAR-100 M-7", "boundary", 0.978, 0.798, 0.888),
    ("CIFAR-100 M-7", "sif", 0.999, 0.900, 0.949),
    ("Tiny ImageNet M-2", "gap", 0.996, 0.962, 0.979),
    ("Tiny ImageNet M-2", "blackbox", 0.944, 0.914, 0.929),
    ("Tiny ImageNet M-2", "boundary", 0.992, 0.976, 0.984),
    ("Tiny ImageNet M-2", "sif", 0.992, 0.978, 0.985),
    ("Tiny ImageNet M-3", "gap", 1.000, 0.905, 0.953),
    ("Tiny ImageNet M-3", "blackbox", 1.000, 0.957, 0.978),
    ("Tiny ImageNet M-3", "boundary", 1.000, 0.976, 0.988),
    ("Tiny ImageNet M-3", "sif", 1.000, 0.994, 0.997),
    ("Tiny ImageNet M-4", "gap", 1.000, 0.855, 0.928),
    ("Tiny ImageNet M-4", "blackbox", 1.000, 0.976, 0.988),
    ("Tiny ImageNet M-4", "boundary", 1.000, 0.964, 0.982),
    ("Tiny ImageNet M-4", "sif", 1.000, 0.989, 0.994),
    ("Tiny ImageNet M-5", "gap", 1.000, 0.808, 0.904),
    ("Tiny ImageNet M-5", "blackbox", 1.000, 0.974, 0.987),
    ("Tiny ImageNet M-5", "boundary", 0.992, 0.958, 0.975),
    ("Tiny ImageNet M-5", "sif", 1.000, 0.992, 0.996),
    ("Tiny ImageNet M-6", "gap", 1.000, 0.780, 0.890),
    ("Tiny ImageNet M-6", "blackbox", 0.999, 0.950, 0.975),
    ("Tiny ImageNet M-6", "boundary", 0.988, 0.944, 0.966),
    ("Tiny ImageNet M-6", "sif", 1.000, 0.966, 0.983),
    ("Tiny ImageNet M-7", "gap", 1.000, 0.754, 0.877),
    ("Tiny ImageNet M-7", "blackbox", 0.994, 0.962, 0.978),
    ("Tiny ImageNet M-7", "boundary", 0.996, 0.946, 0.971),
    ("Tiny ImageNet M-7", "sif", 1.000, 0.928, 0.964),
];

/// The same columns from the precision/recall tables (two decimals).
pub const PRECISION_RECALL: &[(&str, &str, f64, f64, f64)] = &[
    ("CIFAR-10 M-1", "gap", 1.00, 0.78, 0.89),
    ("CIFAR-10 M-1", "blackbox", 0.60, 0.48, 0.54),
    ("CIFAR-10 M-1", "boundary", 0.98, 0.92, 0.95),
    ("CIFAR-10 M-1", "sif", 1.00, 0.98, 0.99),
    ("CIFAR-10 M-2", "gap", 1.00, 0.61, 0.81),
    ("CIFAR-10 M-2", "blackbox", 1.00, 0.62, 0.81),
    ("CIFAR-10 M-2", "boundary", 0.99, 0.81, 0.90),
    ("CIFAR-10 M-2", "sif", 1.00, 0.91, 0.95),
    ("CIFAR-10 M-3", "gap", 1.00, 0.41, 0.71),
    ("CIFAR-10 M-3", "blackbox", 1.00, 0.67, 0.83),
    ("CIFAR-10 M-3", "boundary", 0.95, 0.75, 0.85),
    ("CIFAR-10 M-3", "sif", 1.00, 0.82, 0.91),
    ("CIFAR-10 M-4", "gap", 1.00, 0.36, 0.68),
    ("CIFAR-10 M-4", "blackbox", 0.99, 0.65, 0.82),
    ("CIFAR-10 M-4", "boundary", 0.91, 0.68, 0.80),
    ("CIFAR-10 M-4", "sif", 0.99, 0.75, 0.87),
    ("CIFAR-10 M-5", "gap", 1.00, 0.25, 0.63),
    ("CIFAR-10 M-5", "blackbox", 1.00, 0.51, 0.76),
    ("CIFAR-10 M-5", "boundary", 0.95, 0.59, 0.77),
    ("CIFAR-10 M-5", "sif", 0.99, 0.64, 0.81),
    ("CIFAR-10 M-6", "gap", 1.00, 0.24, 0.62),
    ("CIFAR-10 M-6", "blackbox", 0.89, 0.63, 0.76),
    ("CIFAR-10 M-6", "boundary", 0.97, 0.50, 0.74),
    ("CIFAR-10 M-6", "sif", 0.98, 0.62, 0.80),
    ("CIFAR-10 M-7", "gap", 1.00, 0.23, 0.62),
    ("CIFAR-10 M-7", "blackbox", 1.00, 0.58, 0.79),
    ("CIFAR-10 M-7", "boundary", 0.91, 0.62, 0.76),
    ("CIFAR-10 M-7", "sif", 1.00, 0.55, 0.78),
    ("CIFAR-100 M-1", "gap", 1.00, 1.00, 1.00),
    ("CIFAR-100 M-1", "blackbox", 0.14, 0.78, 0.46),
    ("CIFAR-100 M-1", "boundary", 1.00, 1.00, 1.00),
    ("CIFAR-100 M-1", "sif", 1.00, 1.00, 1.00),
    ("CIFAR-100 M-2", "gap", 1.00, 0.85, 0.92),
    ("CIFAR-100 M-2", "blackbox", 1.00, 0.85, 0.93),
    ("CIFAR-100 M-2", "boundary", 1.00, 0.95, 0.98),
    ("CIFAR-100 M-2", "sif", 1.00, 0.99, 1.00),
    ("CIFAR-100 M-3", "gap", 1.00, 0.76, 0.88),
    ("CIFAR-100 M-3", "blackbox", 1.00, 0.93, 0.97),
    ("CIFAR-100 M-3", "boundary", 0.99, 0.94, 0.96),
    ("CIFAR-100 M-3", "sif", 1.00, 0.98, 0.99),
    ("CIFAR-100 M-4", "gap", 1.00, 0.69, 0.85),
    ("CIFAR-100 M-4", "blackbox", 1.00, 0.91, 0.96),
    ("CIFAR-100 M-4", "boundary", 1.00, 0.90, 0.95),
    ("CIFAR-100 M-4", "sif", 1.00, 0.96, 0.98),
    ("CIFAR-100 M-5", "gap", 1.00, 0.60, 0.80),
    ("CIFAR-100 M-5", "blackbox", 1.00, 0.91, 0.95),
    ("CIFAR-100 M-5", "boundary", 0.97, 0.86, 0.92),
    ("CIFAR-100 M-5", "sif", 1.00, 0.95, 0.98),
    ("CIFAR-100 M-6", "gap", 1.00, 0.53, 0.77),
    ("CIFAR-100 M-6", "blackbox", 0.99, 0.89, 0.94),
    ("CIFAR-100 M-6", "boundary", 0.99, 0.84, 0.91),
    ("CIFAR-100 M-6", "sif", 1.00, 0.93, 0.97),
    ("CIFAR-100 M-7", "gap", 1.00, 0.52, 0.76),
    ("CIFAR-100 M-7", "blackbox", 0.99, 0.86, 0.93),
    ("CIFAR-100 M-7", "boundary", 0.98, 0.80, 0.89),
    ("CIFAR-100 M-7", "sif", 1.00, 0.90, 0.95),
    ("Tiny ImageNet M-2", "gap", 1.00, 0.96, 0.98),
    ("Tiny ImageNet M-2", "blackbox", 0.94, 0.91, 0.93),
    ("Tiny ImageNet M-2", "boundary", 0.99, 0.98, 0.98),
    ("Tiny ImageNet M-2", "sif", 0.99, 0.98, 0.99),
    ("Tiny ImageNet M-3", "gap", 1.00, 0.91, 0.95),
    ("Tiny ImageNet M-3", "blackbox", 1.00, 0.96, 0.98),
    ("Tiny ImageNet M-3", "boundary", 1.00, 0.98, 0.99),
    ("Tiny ImageNet M-3", "sif", 1.00, 0.99, 1.00),
    ("Tiny ImageNet M-4", "gap", 1.00, 0.86, 0.93),
    ("Tiny ImageNet M-4", "blackbox", 1.00, 0.98, 0.99),
    ("Tiny ImageNet M-4", "boundary", 1.00, 0.96, 0.98),
    ("Tiny ImageNet M-4", "sif", 1.00, 0.99, 0.99),
    ("Tiny ImageNet M-5", "gap", 1.00, 0.81, 0.90),
    ("Tiny ImageNet M-5", "blackbox", 1.00, 0.97, 0.99),
    ("Tiny ImageNet M-5", "boundary", 0.99, 0.96, 0.98),
    ("Tiny ImageNet M-5", "sif", 1.00, 0.99, 1.00),
    ("Tiny ImageNet M-6", "gap", 1.00, 0.78, 0.89),
    ("Tiny ImageNet M-6", "blackbox", 1.00, 0.95, 0.97),
    ("Tiny ImageNet M-6", "boundary", 0.99, 0.94, 0.97),
    ("Tiny ImageNet M-6", "sif", 1.00, 0.97, 0.98),
    ("Tiny ImageNet M-7", "gap", 1.00, 0.75, 0.88),
    ("Tiny ImageNet M-7", "blackbox", 0.99, 0.96, 0.98),
    ("Tiny ImageNet M-7", "boundary", 1.00, 0.95, 0.97),
    ("Tiny ImageNet M-7", "sif", 1.00, 0.93, 0.96),
];
