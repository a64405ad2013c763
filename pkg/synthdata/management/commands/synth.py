"""
Generate a labelled synthetic wheat-plot dataset.

    python manage.py synth --config c.json --out DIR
"""

import numpy as np

from core.commands import PipelineCommand
from synthdata.generator import generate_dataset


class Command(PipelineCommand):
    help = 'Generate synthetic plots, masks, plant bases and labels under --out'

    def run(self, cfg, out, options):
        plots = generate_dataset(cfg.synth, cfg.data.n_plots, cfg.seed, out_dir=out, jobs=cfg.jobs)
        counts = np.array([plot.count for plot in plots])
        biomass = np.array([plot.biomass for plot in plots])
        self.stdout.write(f"  {len(plots)} plots, {int(counts.sum())} plants")
        return {
            'n_plots': len(plots),
            'plants_total': int(counts.sum()),
            'count_range': [int(counts.min()), int(counts.max())],
            'biomass_mean': float(biomass.mean()),
            'labels_csv': str(out / 'labels.csv'),
        }
