# controllers/search_controller.py
from flask import Blueprint, jsonify

from controllers.common import body, error_response, field, run_config
from services.data_loader import context_from_dict, context_to_dict, parse_tatqa
from services.errors import ConfigError
from services.supervision_export import records
from services.synthesis import MODES, synthesize_batch

search_bp = Blueprint("search", __name__)


# Pseudo-program search over posted TAT-QA instances
@search_bp.route("/search", methods=["POST"])
def search():
    try:
        data = body()
        cfg = run_config()
        mode = data.get("mode", cfg.mode)
        if mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}")
        raw = field(data, "instances")
        if isinstance(raw, dict):
            contexts = [context_from_dict(raw, "$.instances")]
        else:
            contexts = parse_tatqa(raw, cfg.rank_paragraphs)

        batch = synthesize_batch(contexts, cfg.synthesis, cfg.legality, mode, cfg.tokenizer,
                                 cfg.max_context_tokens, workers=1,
                                 augment=bool(data.get("augment", True)))
        return jsonify({
            "records": list(records(batch.sets)),
            "summary": batch.summary,
            "augmented": [
                {"instance_id": ctx.id, "context": context_to_dict(ctx), "records": list(records([s]))}
                for ctx, s in batch.augmented
            ],
        }), 200
    except Exception as e:
        return error_response(e)
