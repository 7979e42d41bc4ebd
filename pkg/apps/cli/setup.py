from setuptools import setup, find_packages

setup(
    name="stnlab-cli",
    version="0.1.0",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    install_requires=[
        "stnlab-common",
        "stnlab-core",
        "experiments",
        "numpy>=1.24",
        "pydantic>=2.0.0",
    ],
    entry_points={"console_scripts": ["stnlab = stnlab_cli.main:main"]},
    python_requires=">=3.10",
)
