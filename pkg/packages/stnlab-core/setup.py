from setuptools import setup, find_packages

setup(
    name="stnlab-core",
    version="0.1.0",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    install_requires=[
        "stnlab-common",
        "numpy>=1.24",
        "pydantic>=2.0.0",
    ],
    python_requires=">=3.10",
)
