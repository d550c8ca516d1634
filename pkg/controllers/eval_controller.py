# controllers/eval_controller.py
import json

from flask import Blueprint, jsonify

from controllers.common import body, error_response, field, run_config
from services.data_loader import parse_predictions, parse_tatqa
from services.errors import SchemaError
from services.metrics import score_dataset

eval_bp = Blueprint("eval", __name__)


# EM / F1 of posted predictions against posted TAT-QA gold
@eval_bp.route("/eval", methods=["POST"])
def evaluate():
    try:
        data = body()
        preds = field(data, "predictions", list)
        if not all(isinstance(p, dict) for p in preds):
            raise SchemaError("$.predictions", "each prediction must be an object")
        golds = parse_tatqa(field(data, "gold", list), run_config().rank_paragraphs)
        result = score_dataset(parse_predictions(json.dumps(p) for p in preds), golds)
        return jsonify(result.to_dict(with_instances=True)), 200
    except Exception as e:
        return error_response(e)
