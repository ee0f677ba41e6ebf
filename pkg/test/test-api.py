"""
Smoke test for a running LTO Verifier API.
Start the server (python -m app.main) and run this script against it.
"""

import argparse
import json

import requests

# Default API URL (update this when deployed)
DEFAULT_API_URL = "http://localhost:8000/api/"

STANDARD_RUNS = {
    "toric lto": {"models": [{"kind": "toric", "patch": [4, 4]}], "checks": ["lto"]},
    "rotated rp": {
        "models": [{"kind": "toric", "patch": [4, 5], "layout": "rotated"}],
        "checks": ["rp", "rp_hamiltonian"],
        "ladder": [1, 2],
    },
    "fibonacci skein": {"categories": [{"cat": "fibonacci", "n": 2}], "checks": ["skein"]},
    "toolkit": {"checks": ["tomita"], "samples": 20},
}


def run_config(api_url, name, config):
    """
    Post one RunConfig to /api/run and print the verdicts.

    Args:
        api_url: Base URL of the API
        name: Label for the printout
        config: RunConfig document
    """
    print(f"\n🧪 Running {name}: {', '.join(config['checks'])}")
    response = requests.post(api_url + "run", json=config, timeout=600)
    if response.status_code != 200:
        print(f"❌ Error: {response.status_code}")
        print(response.text)
        return None

    merged = response.json()
    for report in merged["reports"]:
        error = f" ({report['error']['code']})" if report.get("error") else ""
        print(f"  {'✅' if report['pass'] else '❌'} {report['check']}{error}")
    return merged["pass"]


def run_standard_tests(api_url):
    print("🚀 Running standard checks against the LTO Verifier API")
    print(f"🔗 API URL: {api_url}")

    checks = requests.get(api_url + "checks", timeout=30).json()
    print(f"📋 {len(checks['checks'])} checks, suites: {', '.join(checks['suites'])}")

    results = {name: run_config(api_url, name, config) for name, config in STANDARD_RUNS.items()}

    print("\n📊 Summary:")
    for name, passed in results.items():
        print(f"{name}: {'✅ Pass' if passed else '❌ Fail'}")


def main():
    parser = argparse.ArgumentParser(description="Smoke test the LTO Verifier API")
    parser.add_argument("--url", default=DEFAULT_API_URL, help="API base URL")
    parser.add_argument("--config", help="Path to a JSON RunConfig to post instead of the standard runs")

    args = parser.parse_args()

    if args.config:
        with open(args.config, "r", encoding="utf-8") as f:
            run_config(args.url, args.config, json.load(f))
    else:
        run_standard_tests(args.url)

    print("\n🏁 Testing complete!")


if __name__ == "__main__":
    main()
