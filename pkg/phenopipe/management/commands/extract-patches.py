"""
Cut per-component patches from plots and masks.

    python manage.py extract-patches --config c.json --out DIR
"""

from pathlib import Path

from core.commands import PipelineCommand
from imaging.patches import extract_patches
from phenopipe.counting import labelled_patches, write_patch_set
from phenopipe.records import load_mask, load_records
from synthdata.generator import read_bases


class Command(PipelineCommand):
    help = 'Write patches and patches.csv under <out>/patches; labels them from data.bases_dir when set'

    def run(self, cfg, out, options):
        records = load_records(self.require(cfg.data, 'plots_dir'))
        masks_dir = self.require(cfg.data, 'masks_dir')
        bases_dir = cfg.data.bases_dir

        patches = []
        per_plot = {}
        for record in records:
            raster = record.raster()
            mask = load_mask(masks_dir, record.plot_id)
            if bases_dir:
                bases = read_bases(Path(bases_dir) / f"{record.plot_id}.json")['bases']
                found = labelled_patches(raster, mask, bases, cfg.patches, record.plot_id)
            else:
                found = extract_patches(raster, mask, cfg.patches, record.plot_id)
            per_plot[record.plot_id] = len(found)
            patches.extend(found)

        index = write_patch_set(out / 'patches', patches)
        self.stdout.write(f"  {len(patches)} patches from {len(records)} plots")
        return {
            'patches_csv': str(index),
            'n_patches': len(patches),
            'labelled': bool(bases_dir),
            'patches_per_plot': per_plot,
        }
