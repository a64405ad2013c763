"""
RMRS-augment plots.

    python manage.py augment --config c.json --out DIR
"""

from core.commands import PipelineCommand
from augment.rmrs import channel_sum_ratio, rmrs_augment, write_sidecar
from augment.superpixels import slic
from imaging.raster import write_raster
from phenopipe.records import load_records


class Command(PipelineCommand):
    help = 'Write rmrs.samples augmented rasters per plot plus a JSON sidecar of the swaps'

    def run(self, cfg, out, options):
        records = load_records(self.require(cfg.data, 'plots_dir'))
        aug_dir = out / 'augmented'
        aug_dir.mkdir(parents=True, exist_ok=True)
        rmrs = cfg.rmrs

        plots = []
        for record in records:
            raster = record.raster()
            spmap = slic(raster, rmrs.k_target, rmrs.compactness, rmrs.slic_iters)
            rasters, plans = rmrs_augment(raster, rmrs, spmap=spmap, jobs=cfg.jobs)
            for plan, augmented in zip(plans, rasters):
                write_raster(aug_dir / f"{record.plot_id}_aug{plan.sample:03d}.dwrs", augmented)
            write_sidecar(aug_dir / f"{record.plot_id}_aug.json", record.plot_id, rmrs, spmap, plans)

            row = {
                'plot_id': record.plot_id,
                'superpixels': spmap.k,
                'samples': len(plans),
                'swaps_applied': sum(len(plan.applied) for plan in plans),
                'swaps_skipped': sum(len(plan.pairs) - len(plan.applied) for plan in plans),
            }
            if raster.has(('H',)):
                ratios = [channel_sum_ratio(raster, augmented) for augmented in rasters]
                row['height_sum_ratio'] = [min(ratios), max(ratios)]
            plots.append(row)

        self.stdout.write(f"  augmented {len(plots)} plots x {rmrs.samples} samples into {aug_dir}")
        return {'augmented_dir': str(aug_dir), 'plots': plots}
