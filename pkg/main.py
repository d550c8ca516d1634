from flask import Flask, jsonify
from flask_cors import CORS

from config.settings import configure_logging
from controllers.common import run_config

# ------------------------------------------
# Flask App Initialize
# ------------------------------------------
app = Flask(__name__)

CORS(app, resources={r"/api/*": {"origins": "*"}})

app.json.sort_keys = False

configure_logging(run_config().log_level)

# ------------------------------------------
# Import Controllers (Blueprints)
# ------------------------------------------
from controllers.program_controller import program_bp
from controllers.mask_controller import mask_bp
from controllers.search_controller import search_bp
from controllers.eval_controller import eval_bp

# ------------------------------------------
# Register Blueprints
# ------------------------------------------
app.register_blueprint(program_bp, url_prefix="/api/program")
app.register_blueprint(mask_bp, url_prefix="/api")
app.register_blueprint(search_bp, url_prefix="/api")
app.register_blueprint(eval_bp, url_prefix="/api")

# ------------------------------------------
# Default Routes / Health Checks
# ------------------------------------------
@app.route("/")
def home():
    """Base route for quick status check."""
    return jsonify({
        "message": "hybrid-rpg backend running",
        "status": "ok",
        "available_endpoints": [
            "/api/program/parse",
            "/api/program/check",
            "/api/program/exec",
            "/api/mask",
            "/api/search",
            "/api/eval",
        ]
    }), 200


@app.route("/ping", methods=["GET"])
def ping():
    return jsonify({"status": "ok"}), 200


if __name__ == "__main__":
    app.run(host="0.0.0.0", port=5000, debug=False)
