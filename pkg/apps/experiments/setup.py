from setuptools import setup, find_packages

setup(
    name="experiments",
    version="0.1.0",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    install_requires=[
        "stnlab-common",
        "stnlab-core",
        "numpy>=1.24",
        "pillow>=10.0.0",
    ],
    python_requires=">=3.10",
)
