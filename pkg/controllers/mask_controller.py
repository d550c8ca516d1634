# controllers/mask_controller.py
from flask import Blueprint, jsonify

from controllers.common import body, context_and_input, decoding_prefix, error_response, legality_for
from services.legality import open_session, sorted_tokens

mask_bp = Blueprint("mask", __name__)


# Legal next decoding tokens after a prefix
@mask_bp.route("/mask", methods=["POST"])
def mask():
    try:
        data = body()
        ctx, li = context_and_input(data)
        session = open_session(li, legality_for(ctx))
        for t in decoding_prefix(data.get("prefix", [])):
            session.advance(t)
        if session.closed:
            return jsonify({"legal": [], "ids": [], "closed": True, "dead_end": False,
                            "program": str(session.program)}), 200
        legal = sorted_tokens(session.legal_next())
        return jsonify({
            "legal": [str(t) for t in legal],
            "ids": [t.id for t in legal],
            "closed": False,
            "dead_end": not legal,
        }), 200
    except Exception as e:
        return error_response(e)
