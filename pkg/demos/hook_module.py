"""Generate hook-module source for one model in both target profiles.

Prints the section layout of the Java output and the shared state switch as
rendered for the simulator profile.

    python3 demos/hook_module.py [ModelName]
"""

import sys

from enforcekit import load_catalog
from enforcekit.codegen import generate, hooked_methods, section_report
from enforcekit.sim import models_by_name


def main(name: str = "CameraReleaseOnPause") -> None:
    cat = load_catalog()
    model = models_by_name()[name]

    java = generate(model, "xposed-java", cat)
    print(f"{name}: {len(java.source_text.splitlines())} lines of Java")
    for section in section_report(java):
        print(f"  {section}")
    for cls, methods in hooked_methods(model).items():
        print(f"  hooks on {cls}: {', '.join(sorted(methods))}")

    print("\nstate switch (simscript profile):")
    print(generate(model, "simscript", cat).switch_text)


if __name__ == "__main__":
    main(*sys.argv[1:2])
