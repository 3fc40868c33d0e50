import os

from setuptools import find_packages, setup

dpath = os.path.dirname(os.path.realpath(__file__))
with open(os.path.join(dpath, "README.md"), "r") as f:
    long_description = f.read()


setup(
    name="dcglab",
    version="0.1.0",
    description="Computational checks of discrete conformal geometry on triangle meshes",
    long_description=long_description,
    long_description_content_type="text/markdown",
    license="MIT",
    entry_points={"console_scripts": ["dcglab = dcglab.cli:cli"]},
    packages=find_packages(exclude=["tests"]),
    python_requires=">=3.8",
    install_requires=[
        "attrs >= 21.2.0",
        "click >= 8.0.0",
        "networkx >= 3.0",
        "numpy >= 1.24",
        "scipy >= 1.12",
        "shapely >= 2.0",
        "sympy >= 1.12",
        "tabulate >= 0.8.9",
    ],
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Natural Language :: English",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
)
