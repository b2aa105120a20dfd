"""Built-in experiment configurations (also shipped as files in configs/)."""
from __future__ import annotations

_HEADER = "[experiment]\nschema_version = 1\n"

PRESETS = {
    "logic_enn": _HEADER + """\
name = logic_enn
dataset = logic
trainer = enn
seed = 0
evaluations = error

[enn]
target_subconcepts = 8
svm_cost = 1000
differentia_multiplier = inf
prune = true
margin_fraction = 0.5
error_tolerance = 0
symbolic_tolerance = 1e-6
""",
    "logic_gdn": _HEADER + """\
name = logic_gdn
dataset = logic
trainer = gdn
seed = 0
evaluations = error

[gdn]
hidden_widths = 4, 4
batch_size = 4
epochs = 3000
""",
    "orientation_enn": _HEADER + """\
name = orientation_enn
dataset = orientation
trainer = enn
seed = 0
evaluations = error, oracle

[enn]
target_subconcepts = 56
svm_cost = 1000
differentia_multiplier = inf
prune = false
subconcept_inputs = all
symbolic_tolerance = 1e-6
""",
    "orientation_gdn": _HEADER + """\
name = orientation_gdn
dataset = orientation
trainer = gdn
seed = 0
evaluations = error

[gdn]
hidden_widths = 784, 56
batch_size = 8
epochs = 200
""",
    "tsp_denn": _HEADER + """\
name = tsp_denn
dataset = tsp
trainer = enn
seed = 0
evaluations = tsp, oracle

[dataset]
n_test = 5000

[enn]
target_subconcepts = 90
svm_cost = 1000
differentia_multiplier = inf
prune = true
margin_fraction = 0.99
subconcept_inputs = associated
concept_init = direct
concept_activation = sigmoid
symbolic_tolerance = 1e-9

[deliberation]
trigger_ratio = 10

[evaluation]
n_instances = 1000
""",
    "tsp_gdn": _HEADER + """\
name = tsp_gdn
dataset = tsp
trainer = gdn
seed = 0
evaluations = tsp

[dataset]
n_test = 5000

[gdn]
hidden_widths = 1125, 90
batch_size = 8
epochs = 300
""",
    "bdt_denn": _HEADER + """\
name = bdt_denn
dataset = bdt
trainer = enn
seed = 0
evaluations = bdt, oracle

[dataset]
n_test = 5000

[enn]
target_subconcepts = 20
svm_cost = 1000
differentia_multiplier = inf
prune = false
subconcept_inputs = all
symbolic_tolerance = 1e-6

[deliberation]
trigger_ratio = 2

[evaluation]
n_instances = 1000
""",
    "bdt_gdn": _HEADER + """\
name = bdt_gdn
dataset = bdt
trainer = gdn
seed = 0
evaluations = bdt

[dataset]
n_test = 5000

[gdn]
hidden_widths = 180, 20
batch_size = 4
epochs = 300
""",
    "mnist_enn": _HEADER + """\
name = mnist_enn
dataset = mnist
trainer = enn
seed = 0
evaluations = error, weights, firing, lesion

[dataset]
per_class = 1000

[enn]
target_subconcepts = 60
svm_cost = 1
svm_tol = 0.01
differentia_multiplier = 2
subconcept_multiplier_max = 5
prune = false
sgd_learning_rate = 0.1
sgd_batch_size = 32
sgd_epochs = 30

[evaluation]
n_stimuli = 350
sizes = 1000, 4000, 10000
scaling_repeats = 3
scaling_gdn = false
""",
    "mnist_gdn": _HEADER + """\
name = mnist_gdn
dataset = mnist
trainer = gdn
seed = 0
evaluations = error, weights, firing, lesion

[dataset]
per_class = 1000

[gdn]
hidden_widths = 1615, 60
batch_size = 32
epochs = 30
""",
    "mnist_cenn": _HEADER + """\
name = mnist_cenn
dataset = mnist
trainer = cenn
seed = 0
evaluations = error

[dataset]
per_class = 1000

[conv]
layers = 6:5x5, 16:5x5
windows_per_class = 100
multiplier = 2
pad = 32

[enn]
target_subconcepts = 60
svm_cost = 1
svm_tol = 0.01
differentia_multiplier = 2
subconcept_multiplier_max = 5
prune = false
sgd_epochs = 30
""",
    "rectangles_enn": _HEADER + """\
name = rectangles_enn
dataset = rectangles
trainer = enn
seed = 0
evaluations = error, noise, fgsm, boundary

[dataset]
per_class = 2500
n_test = 1000

[enn]
target_subconcepts = 56
svm_cost = 1
svm_tol = 0.01
differentia_multiplier = 2
subconcept_multiplier_max = 5
prune = true
margin_fraction = 0.5
sgd_epochs = 30

[evaluation]
n_images = 1000
n_boundary_images = 100
sigmas = 0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8, 1.0, 1.5, 2.0
repeats = 20
n_targets = 20
""",
    "rectangles_gdn": _HEADER + """\
name = rectangles_gdn
dataset = rectangles
trainer = gdn
seed = 0
evaluations = error, noise, fgsm, boundary

[dataset]
per_class = 2500
n_test = 1000

# hidden widths copied from the ENN trained with the same seed
[enn]
target_subconcepts = 56
svm_cost = 1
svm_tol = 0.01
differentia_multiplier = 2
subconcept_multiplier_max = 5
prune = true
margin_fraction = 0.5
sgd_epochs = 30

[gdn]
hidden_widths = match
batch_size = 32
epochs = 50

[evaluation]
n_images = 1000
n_boundary_images = 100
sigmas = 0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8, 1.0, 1.5, 2.0
repeats = 20
n_targets = 20
""",
}
