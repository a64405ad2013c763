"""
Class activation maps for the counter (per patch) or the biomass model
(per plot).

    python manage.py cam --config c.json --model counter --out DIR
"""

from core.commands import PipelineCommand
from netblocks.modelio import load_model
from phenopipe.cam import compute_cam, write_cam_png
from phenopipe.counting import read_patch_set
from phenopipe.records import load_records
from phenopipe.training import pad_to


class Command(PipelineCommand):
    help = 'Write CAM overlays under <out>/cam and the CAM identity residual per input'

    def add_command_arguments(self, parser):
        parser.add_argument('--model', choices=['counter', 'biomass'], default='counter',
                            help='Which trained model to explain (default: counter)')

    def _counter_inputs(self, cfg):
        serial = {}
        for patch in read_patch_set(self.require(cfg.data, 'patches_dir')):
            index = serial.get(patch.plot_id, 0)
            serial[patch.plot_id] = index + 1
            yield f"{patch.plot_id}_{index:03d}", patch.image.data, patch.image.data

    def _biomass_inputs(self, cfg, params):
        channels = tuple(params.meta.get('channels', ''))
        size = params.spec.input_size
        for record in load_records(self.require(cfg.data, 'plots_dir')):
            raster = record.raster()
            data = pad_to(raster.select(channels).data, *size)
            backdrop = pad_to(raster.rgb().data, *size) if raster.has(('R', 'G', 'B')) else None
            yield record.plot_id, data, backdrop

    def run(self, cfg, out, options):
        which = options.get('model') or 'counter'
        params = load_model(self.require(cfg.data, f"{which}_model"))
        if which == 'counter':
            inputs = self._counter_inputs(cfg)
        else:
            inputs = self._biomass_inputs(cfg, params)
        cam_dir = out / 'cam'
        cam_dir.mkdir(parents=True, exist_ok=True)

        rows = []
        for name, data, backdrop in inputs:
            cam = compute_cam(params, data)
            write_cam_png(cam_dir / f"{name}.png", cam, backdrop)
            rebuilt = float(cam.heatmap.mean()) + cam.bias
            rows.append({'id': name, 'prediction': cam.prediction,
                         'identity_error': abs(rebuilt - cam.prediction)})
        self.stdout.write(f"  {len(rows)} CAM overlays written to {cam_dir}")
        return {
            'model': which,
            'cam_dir': str(cam_dir),
            'maps': rows,
            'max_identity_error': max((row['identity_error'] for row in rows), default=0.0),
        }
