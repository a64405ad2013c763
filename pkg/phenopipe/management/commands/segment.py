"""
Segment plots with a trained segmenter.

    python manage.py segment --config c.json --out DIR
"""

from core.commands import PipelineCommand
from imaging.raster import write_mask
from metrics.evaluation import MetricsReport, add_tallies, seg_tally
from netblocks.modelio import load_model
from phenopipe.records import load_mask, load_records
from phenopipe.segmentation import segment_plot


class Command(PipelineCommand):
    help = 'Write a plant mask per plot under <out>/masks; scores them when data.masks_dir is set'

    def run(self, cfg, out, options):
        params = load_model(self.require(cfg.data, 'segmenter_model'))
        records = load_records(self.require(cfg.data, 'plots_dir'))
        masks_out = out / 'masks'
        masks_out.mkdir(parents=True, exist_ok=True)

        rows, tallies = [], []
        for record in records:
            mask = segment_plot(record.raster(), params)
            write_mask(masks_out / f"{record.plot_id}.png", mask)
            rows.append({'plot_id': record.plot_id, 'plant_fraction': float(mask.mean())})
            if cfg.data.masks_dir:
                tallies.append(seg_tally(mask, load_mask(cfg.data.masks_dir, record.plot_id)))

        self.stdout.write(f"  {len(rows)} masks written to {masks_out}")
        return {
            'masks_dir': str(masks_out),
            'plots': rows,
            'metrics': MetricsReport.for_masks(add_tallies(tallies)).to_dict() if tallies else None,
        }
