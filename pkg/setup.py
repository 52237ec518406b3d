from setuptools import setup, find_packages

setup(
    name="wadenet",
    version="1.0.0",
    packages=find_packages(exclude=["tests", "examples*"]),
    install_requires=[
        "numpy>=1.24.0",
        "pandas>=1.5.0",
        "pyyaml>=6.0",
        "click>=8.0.0",
        "tqdm>=4.65.0",
        "scikit-learn>=1.2.0",
    ],
    extras_require={
        "test": ["pytest>=7.0.0"],
    },
    entry_points={
        "console_scripts": [
            "wadenet-cli=src.wadenet_cli:cli",
        ],
    },
    python_requires=">=3.10",
)
