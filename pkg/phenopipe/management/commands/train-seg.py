"""
Train the segmenter on plots and their plant masks.

    python manage.py train-seg --config c.json --out DIR
"""

from core.commands import PipelineCommand
from metrics.evaluation import MetricsReport, add_tallies, seg_tally
from netblocks.modelio import save_model
from phenopipe.records import load_mask, load_records, split_records
from phenopipe.segmentation import segment_plot, train_segmenter


class Command(PipelineCommand):
    help = 'Train the plant/soil segmenter; writes segmenter.dwmp and held-out pixel metrics'

    def run(self, cfg, out, options):
        plots_dir = self.require(cfg.data, 'plots_dir')
        masks_dir = self.require(cfg.data, 'masks_dir')
        train, holdout = split_records(load_records(plots_dir), cfg.data.holdout_fraction)
        self.stdout.write(f"Training segmenter on {len(train)} plots ({len(holdout)} held out)")

        corpus = [(record.raster(), load_mask(masks_dir, record.plot_id)) for record in train]
        train_cfg = cfg.optimizer.apply(cfg.train.segmenter)
        params, log = train_segmenter(corpus, train_cfg, cfg.models.segmenter, cfg.seed)
        model_path = out / 'segmenter.dwmp'
        save_model(model_path, params)
        self.log_epochs(log)

        tally = add_tallies(
            seg_tally(segment_plot(record.raster(), params), load_mask(masks_dir, record.plot_id))
            for record in holdout
        )
        return {
            'model': str(model_path),
            'train_plots': [record.plot_id for record in train],
            'holdout_plots': [record.plot_id for record in holdout],
            'loss_log': log,
            'holdout': MetricsReport.for_masks(tally).to_dict(),
        }
