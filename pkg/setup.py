from setuptools import setup, find_packages

setup(
    name="sde-attention",
    version="0.1.0",
    description="SDE-RNN latent attention for irregular, partially observed time series",
    package_dir={"": "backend"},
    packages=find_packages(where="backend"),
    python_requires=">=3.10",
    install_requires=[
        "numpy>=1.24",
        "pandas>=1.5",
        "python-dotenv>=1.0",
    ],
    extras_require={
        "test": [
            "pytest>=7.0",
            "pytest-env>=0.8",
        ],
        "lint": [
            "black>=23.0",
            "flake8>=6.0",
        ],
    },
    entry_points={"console_scripts": ["sdeattn=sdeattn.cli:main"]},
)
