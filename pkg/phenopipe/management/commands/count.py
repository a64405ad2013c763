"""
Count emerged plants per plot.

    python manage.py count --config c.json --out DIR
"""

from dataclasses import replace

from core.commands import PipelineCommand
from imaging.labels import read_labels, write_labels
from metrics.evaluation import MetricsReport, pairs_from
from netblocks.modelio import load_model
from phenopipe.counting import count_plot
from phenopipe.records import load_mask, load_records


class Command(PipelineCommand):
    help = 'Write <out>/counts.csv; uses data.masks_dir or segments with data.segmenter_model'

    def run(self, cfg, out, options):
        counter = load_model(self.require(cfg.data, 'counter_model'))
        records = load_records(self.require(cfg.data, 'plots_dir'))
        segmenter = None
        if not cfg.data.masks_dir:
            segmenter = load_model(self.require(cfg.data, 'segmenter_model'))
        patch_cfg = replace(cfg.patches, size=counter.spec.input_size[0])

        results = []
        for record in records:
            mask = load_mask(cfg.data.masks_dir, record.plot_id) if segmenter is None else None
            results.append(count_plot(record.raster(), mask, counter, patch_cfg, record.plot_id, segmenter))

        counts_csv = out / 'counts.csv'
        write_labels(counts_csv, [{'plot_id': r.plot_id, 'count': r.total} for r in results])
        self.stdout.write(f"  counted {len(results)} plots, {sum(r.total for r in results)} plants")

        metrics = None
        if cfg.data.labels_csv:
            truth = read_labels(cfg.data.labels_csv, 'count')
            scored = [r for r in results if r.plot_id in truth]
            if scored:
                pairs = pairs_from([r.total for r in scored], [truth[r.plot_id] for r in scored])
                metrics = MetricsReport.for_pairs(pairs).to_dict()
        return {
            'counts_csv': str(counts_csv),
            'plots': [r.to_dict() for r in results],
            'metrics': metrics,
        }
