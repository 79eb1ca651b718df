from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

with open("requirements.txt", "r", encoding="utf-8") as fh:
    requirements = [line.split("#")[0].strip() for line in fh if line.split("#")[0].strip()]

setup(
    name="marker_state_estimation",
    version="0.1.0",
    author="Marker State Team",
    author_email="example@example.com",
    description="Marker-based kinematic state estimation, extrinsics and calibration for low-cost robot arms",
    long_description=long_description,
    long_description_content_type="text/markdown",
    url="https://github.com/yourusername/marker_state_estimation",
    packages=find_packages(exclude=["tests", "tests.*"]),
    classifiers=[
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering",
    ],
    python_requires=">=3.8",
    install_requires=requirements,
    entry_points={
        "console_scripts": [
            "marker-state=src.ui.cli:main",
        ],
    },
    include_package_data=True,
    zip_safe=False,
)
