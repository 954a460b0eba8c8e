"""
Setup script for the Comfort Motion Planner
"""

from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

with open("requirements.txt", "r", encoding="utf-8") as fh:
    requirements = [
        line.strip() for line in fh
        if line.strip() and not line.startswith("#") and line.split("==")[0] not in ("pytest", "black", "flake8", "mypy")
    ]

setup(
    name="comfort-planner",
    version="1.0.0",
    description="Comfort-optimal trajectory planning with frequency-weighted acceleration objectives",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(include=["comfort_planner", "comfort_planner.*"]),
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Topic :: Scientific/Engineering",
    ],
    python_requires=">=3.9",
    install_requires=requirements,
    extras_require={
        "dev": [
            "pytest>=7.4.3",
            "black>=23.11.0",
            "flake8>=6.1.0",
            "mypy>=1.7.1",
        ],
    },
    entry_points={
        "console_scripts": [
            "comfort-planner=comfort_planner.main:main",
        ],
    },
    include_package_data=True,
    data_files=[
        ("routes", ["routes/waarder_a12.road"]),
        ("scenarios", ["scenarios/default.yaml", "scenarios/smoke.yaml"]),
        ("samples", [
            "samples/drive_synthetic_01.yaml",
            "samples/drive_synthetic_01.csv",
            "samples/drive_synthetic_01.meta.yaml",
        ]),
    ],
)
