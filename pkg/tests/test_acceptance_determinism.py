#!/usr/bin/env python
"""
Acceptance: identical seeds give byte-identical reports.

Runs synth, train-seg, extract-patches, train-count and train-biomass twice
into the same output tree (reduced models) and compares every report and
model file byte for byte; the reports carry the per-epoch loss logs.

Run:
    python tests/test_acceptance_determinism.py
"""
import json
import tempfile
from io import StringIO
from pathlib import Path

from django.core.management import call_command

from tester import AcceptanceTester

CONFIG = {
    'data': {'n_plots': 16},
    'synth': {'height': 64, 'width': 128},
    'models': {
        'segmenter': {'stages': 3, 'base_width': 8, 'input_size': [32, 32]},
        'counter': {'base_width': 8, 'input_size': [32, 32]},
        'biomass': {'base_width': 8, 'pool_stages': 3, 'input_size': [64, 128]},
    },
    'train': {'segmenter': {'epochs': 2, 'tiles_per_plot': 2},
              'counter': {'epochs': 3, 'flips': True},
              'biomass': {'epochs': 3, 'augment_per_plot': 4}},
    'patches': {'size': 32},
    'rmrs': {'k_target': 40},
}

STEPS = [
    ('synth', 'synth', {}),
    ('train-seg', 'seg', {'plots_dir': 'synth/plots', 'masks_dir': 'synth/masks'}),
    ('extract-patches', 'patches', {'plots_dir': 'synth/plots', 'masks_dir': 'synth/masks',
                                    'bases_dir': 'synth/bases', 'labels_csv': 'synth/labels.csv'}),
    ('train-count', 'count', {'patches_dir': 'patches/patches'}),
    ('train-biomass', 'biomass', {'plots_dir': 'synth/plots', 'labels_csv': 'synth/labels.csv'}),
]


def run_pipeline(root):
    for command, out, data in STEPS:
        payload = json.loads(json.dumps(CONFIG))
        payload['data'].update({key: str(root / value) for key, value in data.items()})
        config = root / f"{command}.json"
        config.write_text(json.dumps(payload))
        call_command(command, '--config', str(config), '--out', str(root / out), '--seed', '17',
                     '--no-timestamp', stdout=StringIO())
    return {path.relative_to(root): path.read_bytes()
            for path in sorted(root.rglob('*'))
            if path.is_file() and path.suffix in ('.json', '.dwmp', '.csv') and path.parent != root}


def main():
    tester = AcceptanceTester("DETERMINISM ACCEPTANCE")
    tester.section("REPEATED RUNS WITH IDENTICAL SEEDS")
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        first = run_pipeline(root)
        second = run_pipeline(root)

    reports = [name for name in first if name.name.endswith('_report.json')]
    tester.test("every step wrote a report", len(reports) == len(STEPS), len(STEPS), len(reports))
    for name in sorted(first):
        tester.test(f"{name} is byte-identical", first[name] == second.get(name), "identical bytes",
                    "differs" if name in second else "missing")
    tester.finish()


if __name__ == '__main__':
    main()
